#pragma once

#include "sdan/tensor.hpp"

namespace sdan {

enum class Act { relu, sigmoid };

// Flip axes bitmask. Horizontal mirrors x, vertical mirrors y.
enum FlipAxes : unsigned {
    FlipNone = 0u,
    FlipH = 1u,
    FlipV = 2u,
    FlipHV = FlipH | FlipV,
};

template <typename T>
struct Conv2dGradsT {
    TensorT<T> input;
    TensorT<T> weight;
    TensorT<T> bias;  // (1, c_out, 1, 1)
};
using Conv2dGrads = Conv2dGradsT<float>;

// Zero-padded cross-correlation. Output spatial size must divide exactly:
// (in + 2*pad - k) % stride == 0.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const ConvParamsT<T>& params);

// Gradients of sum(grad_out * conv2d(input, params)) w.r.t. each argument.
template <typename T>
Conv2dGradsT<T> conv2d_backward(const TensorT<T>& input, const ConvParamsT<T>& params,
                                const TensorT<T>& grad_out);

template <typename T>
TensorT<T> activation(const TensorT<T>& input, Act kind);

// relu derivative at 0 is 0.
template <typename T>
TensorT<T> activation_backward(const TensorT<T>& input, Act kind, const TensorT<T>& grad_out);

// out[n][c*K*K + ky*K + kx][y][x] = in[n][c][y*K + ky][x*K + kx]
template <typename T>
TensorT<T> space_to_depth(const TensorT<T>& input, int K);

// Exact inverse of space_to_depth; also the pixel-shuffle upsampler.
template <typename T>
TensorT<T> depth_to_space(const TensorT<T>& input, int K);

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& input);

template <typename T>
TensorT<T> global_avg_pool_backward(int h, int w, const TensorT<T>& grad_out);

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);

// Splits grad_out back into the (a, b) shapes; c_a = a's channel count.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> concat_channels_backward(const TensorT<T>& grad_out, int c_a);

template <typename T>
TensorT<T> flip(const TensorT<T>& input, unsigned axes);

// s x s block average. Used for Y' = box-downsample(Y) and the synthetic LR path.
template <typename T>
TensorT<T> box_downsample(const TensorT<T>& input, int s);

// dst += alpha * src
template <typename T>
void add_scaled(TensorT<T>& dst, const TensorT<T>& src, T alpha) {
    if (!dst.same_shape(src)) throw DimError("add_scaled: shape mismatch");
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += alpha * src.data[i];
}

// Row-major C(m x n) = alpha * op(A) op(B) + beta * C. Thin cblas wrapper so
// float and double paths share one call site.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

}  // namespace sdan
