#include "sdan/ops.hpp"

#include <cblas.h>

#include <cmath>

namespace sdan {

template <>
void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
                  const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

namespace {

struct ConvGeom {
    int oh, ow, k, pad, stride;
};

template <typename T>
ConvGeom conv_geometry(const TensorT<T>& input, const ConvParamsT<T>& p, const char* op) {
    p.validate();
    if (input.c != p.c_in())
        throw DimError(std::string(op) + ": input channels " + std::to_string(input.c) +
                       " != weight c_in " + std::to_string(p.c_in()));
    int span_h = input.h + 2 * p.pad - p.k();
    int span_w = input.w + 2 * p.pad - p.k();
    if (span_h < 0 || span_w < 0)
        throw DimError(std::string(op) + ": kernel larger than padded input");
    if (span_h % p.stride != 0 || span_w % p.stride != 0)
        throw DimError(std::string(op) + ": output size is not an exact division");
    return {span_h / p.stride + 1, span_w / p.stride + 1, p.k(), p.pad, p.stride};
}

// Columns layout: row = (ic*k + ki)*k + kj, col = oy*ow + ox.
template <typename T>
void im2col(const TensorT<T>& x, int sample, const ConvGeom& g, std::vector<T>& cols) {
    const int ohow = g.oh * g.ow;
    cols.assign(static_cast<size_t>(x.c) * g.k * g.k * ohow, T(0));
    for (int ic = 0; ic < x.c; ++ic) {
        const T* src = x.plane(sample, ic);
        for (int ki = 0; ki < g.k; ++ki) {
            for (int kj = 0; kj < g.k; ++kj) {
                T* dst = cols.data() + (static_cast<size_t>(ic) * g.k * g.k + ki * g.k + kj) * ohow;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * g.stride - g.pad + ki;
                    if (iy < 0 || iy >= x.h) continue;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * g.stride - g.pad + kj;
                        if (ix < 0 || ix >= x.w) continue;
                        dst[oy * g.ow + ox] = src[iy * x.w + ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const std::vector<T>& cols, int channels, const ConvGeom& g, TensorT<T>& x,
                int sample) {
    const int ohow = g.oh * g.ow;
    for (int ic = 0; ic < channels; ++ic) {
        T* dst = x.plane(sample, ic);
        for (int ki = 0; ki < g.k; ++ki) {
            for (int kj = 0; kj < g.k; ++kj) {
                const T* src =
                    cols.data() + (static_cast<size_t>(ic) * g.k * g.k + ki * g.k + kj) * ohow;
                for (int oy = 0; oy < g.oh; ++oy) {
                    int iy = oy * g.stride - g.pad + ki;
                    if (iy < 0 || iy >= x.h) continue;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        int ix = ox * g.stride - g.pad + kj;
                        if (ix < 0 || ix >= x.w) continue;
                        dst[iy * x.w + ix] += src[oy * g.ow + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvParamsT<T>& params) {
    ConvGeom g = conv_geometry(input, params, "conv2d");
    const int ckk = input.c * g.k * g.k;
    const int ohow = g.oh * g.ow;
    TensorT<T> out(input.n, params.c_out(), g.oh, g.ow);
    std::vector<T> cols;
    for (int s = 0; s < input.n; ++s) {
        im2col(input, s, g, cols);
        gemm<T>(false, false, params.c_out(), ohow, ckk, T(1), params.weight.data.data(), ckk,
                cols.data(), ohow, T(0), out.plane(s, 0), ohow);
    }
    for (int s = 0; s < input.n; ++s)
        for (int oc = 0; oc < params.c_out(); ++oc) {
            T b = params.bias.data[oc];
            T* dst = out.plane(s, oc);
            for (int i = 0; i < ohow; ++i) dst[i] += b;
        }
    return out;
}

template <typename T>
Conv2dGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& params,
                                const TensorT<T>& grad_out) {
    ConvGeom g = conv_geometry(input, params, "conv2d_backward");
    if (grad_out.n != input.n || grad_out.c != params.c_out() || grad_out.h != g.oh ||
        grad_out.w != g.ow)
        throw DimError("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                       " does not match forward output");
    const int ckk = input.c * g.k * g.k;
    const int ohow = g.oh * g.ow;

    Conv2dGradsT<T> grads;
    grads.input = TensorT<T>::zeros(input.n, input.c, input.h, input.w);
    grads.weight = TensorT<T>::zeros(params.c_out(), params.c_in(), g.k, g.k);
    grads.bias = TensorT<T>::zeros(1, params.c_out(), 1, 1);

    std::vector<T> cols, grad_cols(static_cast<size_t>(ckk) * ohow);
    for (int s = 0; s < input.n; ++s) {
        im2col(input, s, g, cols);
        // dW += dOut * cols^T
        gemm<T>(false, true, params.c_out(), ckk, ohow, T(1), grad_out.plane(s, 0), ohow,
                cols.data(), ohow, T(1), grads.weight.data.data(), ckk);
        // dCols = W^T * dOut, scattered back through the padding map
        gemm<T>(true, false, ckk, ohow, params.c_out(), T(1), params.weight.data.data(), ckk,
                grad_out.plane(s, 0), ohow, T(0), grad_cols.data(), ohow);
        col2im_add(grad_cols, input.c, g, grads.input, s);
        for (int oc = 0; oc < params.c_out(); ++oc) {
            const T* go = grad_out.plane(s, oc);
            T acc = T(0);
            for (int i = 0; i < ohow; ++i) acc += go[i];
            grads.bias.data[oc] += acc;
        }
    }
    return grads;
}

template <typename T>
TensorT<T> activation(const TensorT<T>& input, Act kind) {
    TensorT<T> out(input.n, input.c, input.h, input.w);
    if (kind == Act::relu) {
        for (size_t i = 0; i < input.data.size(); ++i)
            out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
    } else {
        for (size_t i = 0; i < input.data.size(); ++i)
            out.data[i] = T(1) / (T(1) + std::exp(-input.data[i]));
    }
    return out;
}

template <typename T>
TensorT<T> activation_backward(const TensorT<T>& input, Act kind, const TensorT<T>& grad_out) {
    if (!input.same_shape(grad_out)) throw DimError("activation_backward: shape mismatch");
    TensorT<T> out(input.n, input.c, input.h, input.w);
    if (kind == Act::relu) {
        for (size_t i = 0; i < input.data.size(); ++i)
            out.data[i] = input.data[i] > T(0) ? grad_out.data[i] : T(0);
    } else {
        for (size_t i = 0; i < input.data.size(); ++i) {
            T s = T(1) / (T(1) + std::exp(-input.data[i]));
            out.data[i] = grad_out.data[i] * s * (T(1) - s);
        }
    }
    return out;
}

template <typename T>
TensorT<T> space_to_depth(const TensorT<T>& input, int K) {
    if (K <= 0) throw ConfigError("space_to_depth: K must be positive");
    if (input.h % K != 0 || input.w % K != 0)
        throw DimError("space_to_depth: spatial dims " + input.shape_str() + " not divisible by " +
                       std::to_string(K));
    int oh = input.h / K, ow = input.w / K;
    TensorT<T> out(input.n, input.c * K * K, oh, ow);
    for (int s = 0; s < input.n; ++s)
        for (int ic = 0; ic < input.c; ++ic) {
            const T* src = input.plane(s, ic);
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                    T* dst = out.plane(s, ic * K * K + ky * K + kx);
                    for (int y = 0; y < oh; ++y)
                        for (int x = 0; x < ow; ++x)
                            dst[y * ow + x] = src[(y * K + ky) * input.w + (x * K + kx)];
                }
        }
    return out;
}

template <typename T>
TensorT<T> depth_to_space(const TensorT<T>& input, int K) {
    if (K <= 0) throw ConfigError("depth_to_space: K must be positive");
    if (input.c % (K * K) != 0)
        throw DimError("depth_to_space: channels " + std::to_string(input.c) +
                       " not divisible by K^2");
    int oc = input.c / (K * K);
    TensorT<T> out(input.n, oc, input.h * K, input.w * K);
    for (int s = 0; s < input.n; ++s)
        for (int ic = 0; ic < oc; ++ic) {
            T* dst = out.plane(s, ic);
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                    const T* src = input.plane(s, ic * K * K + ky * K + kx);
                    for (int y = 0; y < input.h; ++y)
                        for (int x = 0; x < input.w; ++x)
                            dst[(y * K + ky) * out.w + (x * K + kx)] = src[y * input.w + x];
                }
        }
    return out;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& input) {
    if (input.h < 1 || input.w < 1) throw DimError("global_avg_pool: empty spatial dims");
    TensorT<T> out(input.n, input.c, 1, 1);
    const T inv = T(1) / (static_cast<T>(input.h) * input.w);
    for (int s = 0; s < input.n; ++s)
        for (int ic = 0; ic < input.c; ++ic) {
            const T* src = input.plane(s, ic);
            T acc = T(0);
            for (int i = 0; i < input.h * input.w; ++i) acc += src[i];
            out.at(s, ic, 0, 0) = acc * inv;
        }
    return out;
}

template <typename T>
TensorT<T> global_avg_pool_backward(int h, int w, const TensorT<T>& grad_out) {
    TensorT<T> out(grad_out.n, grad_out.c, h, w);
    const T inv = T(1) / (static_cast<T>(h) * w);
    for (int s = 0; s < grad_out.n; ++s)
        for (int ic = 0; ic < grad_out.c; ++ic) {
            T g = grad_out.at(s, ic, 0, 0) * inv;
            T* dst = out.plane(s, ic);
            for (int i = 0; i < h * w; ++i) dst[i] = g;
        }
    return out;
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw DimError("concat_channels: " + a.shape_str() + " vs " + b.shape_str());
    TensorT<T> out(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int s = 0; s < a.n; ++s) {
        std::copy_n(a.plane(s, 0), plane * a.c, out.plane(s, 0));
        if (b.c > 0) std::copy_n(b.plane(s, 0), plane * b.c, out.plane(s, a.c));
    }
    return out;
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> concat_channels_backward(const TensorT<T>& grad_out, int c_a) {
    if (c_a < 0 || c_a > grad_out.c) throw DimError("concat_channels_backward: bad split point");
    TensorT<T> ga(grad_out.n, c_a, grad_out.h, grad_out.w);
    TensorT<T> gb(grad_out.n, grad_out.c - c_a, grad_out.h, grad_out.w);
    const size_t plane = static_cast<size_t>(grad_out.h) * grad_out.w;
    for (int s = 0; s < grad_out.n; ++s) {
        if (c_a > 0) std::copy_n(grad_out.plane(s, 0), plane * c_a, ga.plane(s, 0));
        if (gb.c > 0) std::copy_n(grad_out.plane(s, c_a), plane * gb.c, gb.plane(s, 0));
    }
    return {std::move(ga), std::move(gb)};
}

template <typename T>
TensorT<T> flip(const TensorT<T>& input, unsigned axes) {
    TensorT<T> out(input.n, input.c, input.h, input.w);
    const bool fh = axes & FlipH, fv = axes & FlipV;
    for (int s = 0; s < input.n; ++s)
        for (int ic = 0; ic < input.c; ++ic) {
            const T* src = input.plane(s, ic);
            T* dst = out.plane(s, ic);
            for (int y = 0; y < input.h; ++y) {
                int sy = fv ? input.h - 1 - y : y;
                for (int x = 0; x < input.w; ++x) {
                    int sx = fh ? input.w - 1 - x : x;
                    dst[y * input.w + x] = src[sy * input.w + sx];
                }
            }
        }
    return out;
}

template <typename T>
TensorT<T> box_downsample(const TensorT<T>& input, int s) {
    if (s <= 0) throw ConfigError("box_downsample: factor must be positive");
    if (input.h % s != 0 || input.w % s != 0)
        throw DimError("box_downsample: dims not divisible by " + std::to_string(s));
    int oh = input.h / s, ow = input.w / s;
    TensorT<T> out(input.n, input.c, oh, ow);
    const T inv = T(1) / (static_cast<T>(s) * s);
    for (int b = 0; b < input.n; ++b)
        for (int ic = 0; ic < input.c; ++ic) {
            const T* src = input.plane(b, ic);
            T* dst = out.plane(b, ic);
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    T acc = T(0);
                    for (int dy = 0; dy < s; ++dy)
                        for (int dx = 0; dx < s; ++dx)
                            acc += src[(y * s + dy) * input.w + (x * s + dx)];
                    dst[y * ow + x] = acc * inv;
                }
        }
    return out;
}

#define SDAN_INSTANTIATE_OPS(T)                                                                  \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const ConvParamsT<T>&);                     \
    template Conv2dGradsT<T> conv2d_backward<T>(const TensorT<T>&, const ConvParamsT<T>&,        \
                                                const TensorT<T>&);                             \
    template TensorT<T> activation<T>(const TensorT<T>&, Act);                                   \
    template TensorT<T> activation_backward<T>(const TensorT<T>&, Act, const TensorT<T>&);       \
    template TensorT<T> space_to_depth<T>(const TensorT<T>&, int);                               \
    template TensorT<T> depth_to_space<T>(const TensorT<T>&, int);                               \
    template TensorT<T> global_avg_pool<T>(const TensorT<T>&);                                   \
    template TensorT<T> global_avg_pool_backward<T>(int, int, const TensorT<T>&);                \
    template TensorT<T> concat_channels<T>(const TensorT<T>&, const TensorT<T>&);                \
    template std::pair<TensorT<T>, TensorT<T>> concat_channels_backward<T>(const TensorT<T>&,    \
                                                                           int);                 \
    template TensorT<T> flip<T>(const TensorT<T>&, unsigned);                                    \
    template TensorT<T> box_downsample<T>(const TensorT<T>&, int);

SDAN_INSTANTIATE_OPS(float)
SDAN_INSTANTIATE_OPS(double)

}  // namespace sdan
