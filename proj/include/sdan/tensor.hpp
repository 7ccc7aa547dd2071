#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "sdan/common.hpp"

namespace sdan {

// Dense 4-D tensor, row-major in (n, c, h, w). Storage is float in the
// production path; the double instantiation backs the 64-bit accumulation
// mode used by the gradient-check suites.
template <typename T>
struct TensorT {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;
    std::vector<T> grad;  // empty unless alloc_grad() was called

    TensorT() = default;
    TensorT(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        if (n < 0 || c < 0 || h < 0 || w < 0)
            throw DimError("tensor dims must be non-negative");
        data.assign(numel(), T(0));
    }

    static TensorT zeros(int n, int c, int h, int w) { return TensorT(n, c, h, w); }

    static TensorT full(int n, int c, int h, int w, T value) {
        TensorT t(n, c, h, w);
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    static TensorT from_data(int n, int c, int h, int w, std::vector<T> values) {
        TensorT t;
        t.n = n;
        t.c = c;
        t.h = h;
        t.w = w;
        if (values.size() != static_cast<size_t>(n) * c * h * w)
            throw DimError("from_data: value count does not match shape");
        t.data = std::move(values);
        if (checked_mode()) t.check_finite("from_data");
        return t;
    }

    // Uniform fill in [lo, hi) from a dedicated stream.
    static TensorT uniform(int n, int c, int h, int w, T lo, T hi, std::uint64_t seed) {
        TensorT t(n, c, h, w);
        std::mt19937_64 rng(seed);
        for (auto& v : t.data) v = lo + (hi - lo) * static_cast<T>(unit_real(rng));
        return t;
    }

    // Portable uniform in [0,1): avoids std::uniform_real_distribution so the
    // byte layout of generated datasets does not depend on the C++ runtime.
    static double unit_real(std::mt19937_64& rng) {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }

    size_t numel() const {
        return static_cast<size_t>(n) * static_cast<size_t>(c) * static_cast<size_t>(h) *
               static_cast<size_t>(w);
    }

    size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
    }

    T& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
    T at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

    const T* plane(int in, int ic) const { return data.data() + index(in, ic, 0, 0); }
    T* plane(int in, int ic) { return data.data() + index(in, ic, 0, 0); }

    bool same_shape(const TensorT& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
               std::to_string(w);
    }

    void alloc_grad() {
        if (grad.size() != numel()) grad.assign(numel(), T(0));
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }
    bool has_grad() const { return grad.size() == numel() && numel() > 0; }
    T& grad_at(int in, int ic, int iy, int ix) { return grad[index(in, ic, iy, ix)]; }

    void check_finite(const char* where) const {
        for (const T& v : this->data)
            if (!std::isfinite(static_cast<double>(v)))
                throw DimError(std::string(where) + ": non-finite value in tensor " + shape_str());
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(n, c, h, w);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Convolution layer parameters. Weight layout (c_out, c_in, k, k), square
// odd kernels with zero padding.
template <typename T>
struct ConvParamsT {
    TensorT<T> weight;              // (c_out, c_in, k, k)
    TensorT<T> bias;                // (1, c_out, 1, 1)
    int stride = 1;
    int pad = 0;

    int c_out() const { return weight.n; }
    int c_in() const { return weight.c; }
    int k() const { return weight.h; }

    void validate() const {
        if (weight.h != weight.w) throw ConfigError("conv kernel must be square");
        if (weight.h % 2 == 0) throw ConfigError("conv kernel size must be odd");
        if (stride <= 0) throw ConfigError("conv stride must be positive");
        if (pad < 0) throw ConfigError("conv pad must be non-negative");
        if (bias.c != weight.n || bias.n != 1 || bias.h != 1 || bias.w != 1)
            throw ConfigError("conv bias must have shape (1, c_out, 1, 1)");
    }

    template <typename U>
    ConvParamsT<U> cast() const {
        ConvParamsT<U> out;
        out.weight = weight.template cast<U>();
        out.bias = bias.template cast<U>();
        out.stride = stride;
        out.pad = pad;
        return out;
    }
};

using ConvParams = ConvParamsT<float>;

// Fan-in scaled uniform init, zero bias.
template <typename T>
ConvParamsT<T> make_conv(int c_out, int c_in, int k, int pad, std::uint64_t seed) {
    ConvParamsT<T> p;
    T bound = T(1) / std::sqrt(static_cast<T>(c_in) * k * k);
    p.weight = TensorT<T>::uniform(c_out, c_in, k, k, -bound, bound, seed);
    p.bias = TensorT<T>::zeros(1, c_out, 1, 1);
    p.pad = pad;
    return p;
}

}  // namespace sdan
