#pragma once

#include "sdan/tensor.hpp"

namespace sdan {

// squared: one (dy, dx) shared by the whole k x k window at each location,
// field shape (n, 2, h, w). per_point: a (dy, dx) per window tap, shape
// (n, 2*k*k, h, w) with channels ordered (dy0, dx0, dy1, dx1, ...) over
// row-major taps.
enum class OffsetMode { squared, per_point };

template <typename T>
struct OffsetFieldT {
    OffsetMode mode = OffsetMode::squared;
    TensorT<T> data;

    static OffsetFieldT zeros(OffsetMode mode, int n, int h, int w, int k = 3) {
        OffsetFieldT f;
        f.mode = mode;
        f.data = TensorT<T>::zeros(n, mode == OffsetMode::squared ? 2 : 2 * k * k, h, w);
        return f;
    }

    int channels_for(int k) const { return mode == OffsetMode::squared ? 2 : 2 * k * k; }

    void validate(int k) const {
        if (data.c != channels_for(k))
            throw ConfigError("offset field has " + std::to_string(data.c) +
                              " channels, expected " + std::to_string(channels_for(k)) +
                              " for kernel " + std::to_string(k));
    }
};
using OffsetField = OffsetFieldT<float>;

// Binary {0,1} map of locations whose displaced window center stays inside
// the image.
template <typename T>
struct ValidityMaskT {
    TensorT<T> data;  // (n, 1, h, w)

    static ValidityMaskT ones(int n, int h, int w) {
        return {TensorT<T>::full(n, 1, h, w, T(1))};
    }
};
using ValidityMask = ValidityMaskT<float>;

// Zero-outside bilinear read at fractional (y, x). Total function: any
// neighbor outside [0,h)x[0,w) contributes 0.
template <typename T>
T bilinear_sample(const TensorT<T>& feature, int n, int c, T y, T x);

template <typename T>
struct DeformConvGradsT {
    TensorT<T> feature;
    TensorT<T> offsets;  // same shape as the offset field data
    TensorT<T> weight;
    TensorT<T> bias;
};

// Deformable convolution, stride 1, zero-outside sampling, output spatial
// size equals input. params.pad must equal k/2.
template <typename T>
TensorT<T> deform_conv_forward(const TensorT<T>& feature, const OffsetFieldT<T>& offsets,
                               const ConvParamsT<T>& params);

template <typename T>
DeformConvGradsT<T> deform_conv_backward(const TensorT<T>& feature, const OffsetFieldT<T>& offsets,
                                         const ConvParamsT<T>& params, const TensorT<T>& grad_out);

// mask(p) = 1 iff p + offset(p) lies in [0,h)x[0,w). per_point fields use the
// mean tap offset.
template <typename T>
ValidityMaskT<T> validity_mask(const OffsetFieldT<T>& offsets, int h, int w);

// Nearest-neighbor replication by factor s.
template <typename T>
ValidityMaskT<T> upsample_mask(const ValidityMaskT<T>& mask, int s);

}  // namespace sdan
