#include "sdan/deform.hpp"

#include <cmath>

#include "sdan/ops.hpp"

namespace sdan {

template <typename T>
T bilinear_sample(const TensorT<T>& feature, int n, int c, T y, T x) {
    const int h = feature.h, w = feature.w;
    if (y <= T(-1) || y >= static_cast<T>(h) || x <= T(-1) || x >= static_cast<T>(w)) return T(0);
    const int yl = static_cast<int>(std::floor(y));
    const int xl = static_cast<int>(std::floor(x));
    const int yh = yl + 1, xh = xl + 1;
    const T ly = y - yl, lx = x - xl;
    const T hy = T(1) - ly, hx = T(1) - lx;
    const T* p = feature.plane(n, c);
    T v00 = (yl >= 0 && xl >= 0) ? p[yl * w + xl] : T(0);
    T v01 = (yl >= 0 && xh < w) ? p[yl * w + xh] : T(0);
    T v10 = (yh < h && xl >= 0) ? p[yh * w + xl] : T(0);
    T v11 = (yh < h && xh < w) ? p[yh * w + xh] : T(0);
    return hy * hx * v00 + hy * lx * v01 + ly * hx * v10 + ly * lx * v11;
}

namespace {

template <typename T>
void validate_deform(const TensorT<T>& feature, const OffsetFieldT<T>& offsets,
                     const ConvParamsT<T>& params, const char* op) {
    params.validate();
    if (params.stride != 1) throw ConfigError(std::string(op) + ": deformable stride must be 1");
    if (params.pad != params.k() / 2)
        throw ConfigError(std::string(op) + ": deformable pad must be k/2");
    if (feature.c != params.c_in())
        throw DimError(std::string(op) + ": feature channels != weight c_in");
    if (offsets.data.n != feature.n || offsets.data.h != feature.h ||
        offsets.data.w != feature.w)
        throw DimError(std::string(op) + ": offset field " + offsets.data.shape_str() +
                       " does not match feature " + feature.shape_str());
    offsets.validate(params.k());
}

// Corner geometry of one bilinear read, shared by forward and both
// backward passes.
struct Corner {
    int yl, xl;
    bool v00, v01, v10, v11;
};

template <typename T>
inline Corner corner_at(int h, int w, T y, T x) {
    Corner c;
    c.yl = static_cast<int>(std::floor(y));
    c.xl = static_cast<int>(std::floor(x));
    const int yh = c.yl + 1, xh = c.xl + 1;
    c.v00 = c.yl >= 0 && c.yl < h && c.xl >= 0 && c.xl < w;
    c.v01 = c.yl >= 0 && c.yl < h && xh >= 0 && xh < w;
    c.v10 = yh >= 0 && yh < h && c.xl >= 0 && c.xl < w;
    c.v11 = yh >= 0 && yh < h && xh >= 0 && xh < w;
    return c;
}

template <typename T>
inline bool fully_outside(int h, int w, T y, T x) {
    return y <= T(-1) || y >= static_cast<T>(h) || x <= T(-1) || x >= static_cast<T>(w);
}

// Columns layout matches conv2d's im2col: row = (ic*k + ki)*k + kj.
template <typename T>
void deform_im2col(const TensorT<T>& f, const OffsetFieldT<T>& off, int sample, int k,
                   std::vector<T>& cols) {
    const int h = f.h, w = f.w, hw = h * w, kk = k * k, half = k / 2;
    cols.assign(static_cast<size_t>(f.c) * kk * hw, T(0));
    const bool squared = off.mode == OffsetMode::squared;
    for (int t = 0; t < kk; ++t) {
        const int ki = t / k, kj = t % k;
        const T* oy = off.data.plane(sample, squared ? 0 : 2 * t);
        const T* ox = off.data.plane(sample, squared ? 1 : 2 * t + 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int loc = y * w + x;
                const T sy = static_cast<T>(y - half + ki) + oy[loc];
                const T sx = static_cast<T>(x - half + kj) + ox[loc];
                if (fully_outside(f.h, f.w, sy, sx)) continue;
                const Corner cr = corner_at(f.h, f.w, sy, sx);
                const T ly = sy - cr.yl, lx = sx - cr.xl;
                const T w00 = (T(1) - ly) * (T(1) - lx), w01 = (T(1) - ly) * lx;
                const T w10 = ly * (T(1) - lx), w11 = ly * lx;
                for (int ic = 0; ic < f.c; ++ic) {
                    const T* p = f.plane(sample, ic);
                    T v = T(0);
                    if (cr.v00) v += w00 * p[cr.yl * w + cr.xl];
                    if (cr.v01) v += w01 * p[cr.yl * w + cr.xl + 1];
                    if (cr.v10) v += w10 * p[(cr.yl + 1) * w + cr.xl];
                    if (cr.v11) v += w11 * p[(cr.yl + 1) * w + cr.xl + 1];
                    cols[(static_cast<size_t>(ic) * kk + t) * hw + loc] = v;
                }
            }
    }
}

}  // namespace

template <typename T>
TensorT<T> deform_conv_forward(const TensorT<T>& feature, const OffsetFieldT<T>& offsets,
                               const ConvParamsT<T>& params) {
    validate_deform(feature, offsets, params, "deform_conv_forward");
    const int k = params.k(), hw = feature.h * feature.w;
    const int ckk = feature.c * k * k;
    TensorT<T> out(feature.n, params.c_out(), feature.h, feature.w);
    std::vector<T> cols;
    for (int s = 0; s < feature.n; ++s) {
        deform_im2col(feature, offsets, s, k, cols);
        gemm<T>(false, false, params.c_out(), hw, ckk, T(1), params.weight.data.data(), ckk,
                cols.data(), hw, T(0), out.plane(s, 0), hw);
        for (int oc = 0; oc < params.c_out(); ++oc) {
            T b = params.bias.data[oc];
            T* dst = out.plane(s, oc);
            for (int i = 0; i < hw; ++i) dst[i] += b;
        }
    }
    return out;
}

template <typename T>
DeformConvGradsT<T> deform_conv_backward(const TensorT<T>& feature, const OffsetFieldT<T>& offsets,
                                         const ConvParamsT<T>& params,
                                         const TensorT<T>& grad_out) {
    validate_deform(feature, offsets, params, "deform_conv_backward");
    if (grad_out.n != feature.n || grad_out.c != params.c_out() || grad_out.h != feature.h ||
        grad_out.w != feature.w)
        throw DimError("deform_conv_backward: grad_out shape mismatch");

    const int k = params.k(), kk = k * k, half = k / 2;
    const int h = feature.h, w = feature.w, hw = h * w;
    const int ckk = feature.c * kk;
    const bool squared = offsets.mode == OffsetMode::squared;

    DeformConvGradsT<T> grads;
    grads.feature = TensorT<T>::zeros(feature.n, feature.c, h, w);
    grads.offsets = TensorT<T>::zeros(offsets.data.n, offsets.data.c, h, w);
    grads.weight = TensorT<T>::zeros(params.c_out(), params.c_in(), k, k);
    grads.bias = TensorT<T>::zeros(1, params.c_out(), 1, 1);

    std::vector<T> cols, grad_cols(static_cast<size_t>(ckk) * hw);
    for (int s = 0; s < feature.n; ++s) {
        deform_im2col(feature, offsets, s, k, cols);
        gemm<T>(false, true, params.c_out(), ckk, hw, T(1), grad_out.plane(s, 0), hw, cols.data(),
                hw, T(1), grads.weight.data.data(), ckk);
        gemm<T>(true, false, ckk, hw, params.c_out(), T(1), params.weight.data.data(), ckk,
                grad_out.plane(s, 0), hw, T(0), grad_cols.data(), hw);
        for (int oc = 0; oc < params.c_out(); ++oc) {
            const T* go = grad_out.plane(s, oc);
            T acc = T(0);
            for (int i = 0; i < hw; ++i) acc += go[i];
            grads.bias.data[oc] += acc;
        }

        for (int t = 0; t < kk; ++t) {
            const int ki = t / k, kj = t % k;
            const T* oy = offsets.data.plane(s, squared ? 0 : 2 * t);
            const T* ox = offsets.data.plane(s, squared ? 1 : 2 * t + 1);
            T* goy = grads.offsets.plane(s, squared ? 0 : 2 * t);
            T* gox = grads.offsets.plane(s, squared ? 1 : 2 * t + 1);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const int loc = y * w + x;
                    const T sy = static_cast<T>(y - half + ki) + oy[loc];
                    const T sx = static_cast<T>(x - half + kj) + ox[loc];
                    if (fully_outside(h, w, sy, sx)) continue;
                    const Corner cr = corner_at(h, w, sy, sx);
                    const T ly = sy - cr.yl, lx = sx - cr.xl;
                    const T w00 = (T(1) - ly) * (T(1) - lx), w01 = (T(1) - ly) * lx;
                    const T w10 = ly * (T(1) - lx), w11 = ly * lx;
                    T acc_y = T(0), acc_x = T(0);
                    for (int ic = 0; ic < feature.c; ++ic) {
                        const T gc = grad_cols[(static_cast<size_t>(ic) * kk + t) * hw + loc];
                        if (gc == T(0)) continue;
                        const T* p = feature.plane(s, ic);
                        T* gp = grads.feature.plane(s, ic);
                        T v00 = T(0), v01 = T(0), v10 = T(0), v11 = T(0);
                        if (cr.v00) {
                            v00 = p[cr.yl * w + cr.xl];
                            gp[cr.yl * w + cr.xl] += gc * w00;
                        }
                        if (cr.v01) {
                            v01 = p[cr.yl * w + cr.xl + 1];
                            gp[cr.yl * w + cr.xl + 1] += gc * w01;
                        }
                        if (cr.v10) {
                            v10 = p[(cr.yl + 1) * w + cr.xl];
                            gp[(cr.yl + 1) * w + cr.xl] += gc * w10;
                        }
                        if (cr.v11) {
                            v11 = p[(cr.yl + 1) * w + cr.xl + 1];
                            gp[(cr.yl + 1) * w + cr.xl + 1] += gc * w11;
                        }
                        // d(sample)/dy and /dx of the bilinear weights; the
                        // right-sided cell applies at exact integers.
                        acc_y += gc * (lx * (v11 - v01) + (T(1) - lx) * (v10 - v00));
                        acc_x += gc * (ly * (v11 - v10) + (T(1) - ly) * (v01 - v00));
                    }
                    goy[loc] += acc_y;
                    gox[loc] += acc_x;
                }
        }
    }
    return grads;
}

template <typename T>
ValidityMaskT<T> validity_mask(const OffsetFieldT<T>& offsets, int h, int w) {
    const TensorT<T>& d = offsets.data;
    if (d.h != h || d.w != w)
        throw DimError("validity_mask: offset field spatial size mismatch");
    ValidityMaskT<T> m{TensorT<T>::zeros(d.n, 1, h, w)};
    const int pairs = d.c / 2;
    for (int s = 0; s < d.n; ++s) {
        T* dst = m.data.plane(s, 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int loc = y * w + x;
                T dy = T(0), dx = T(0);
                for (int t = 0; t < pairs; ++t) {
                    dy += d.plane(s, 2 * t)[loc];
                    dx += d.plane(s, 2 * t + 1)[loc];
                }
                dy /= static_cast<T>(pairs);
                dx /= static_cast<T>(pairs);
                const T cy = static_cast<T>(y) + dy;
                const T cx = static_cast<T>(x) + dx;
                dst[loc] = (cy >= T(0) && cy < static_cast<T>(h) && cx >= T(0) &&
                            cx < static_cast<T>(w))
                               ? T(1)
                               : T(0);
            }
    }
    return m;
}

template <typename T>
ValidityMaskT<T> upsample_mask(const ValidityMaskT<T>& mask, int s) {
    if (s <= 0) throw ConfigError("upsample_mask: factor must be positive");
    const TensorT<T>& d = mask.data;
    ValidityMaskT<T> out{TensorT<T>::zeros(d.n, 1, d.h * s, d.w * s)};
    for (int b = 0; b < d.n; ++b) {
        const T* src = d.plane(b, 0);
        T* dst = out.data.plane(b, 0);
        for (int y = 0; y < d.h * s; ++y)
            for (int x = 0; x < d.w * s; ++x) dst[y * d.w * s + x] = src[(y / s) * d.w + x / s];
    }
    return out;
}

#define SDAN_INSTANTIATE_DEFORM(T)                                                             \
    template T bilinear_sample<T>(const TensorT<T>&, int, int, T, T);                          \
    template TensorT<T> deform_conv_forward<T>(const TensorT<T>&, const OffsetFieldT<T>&,      \
                                               const ConvParamsT<T>&);                         \
    template DeformConvGradsT<T> deform_conv_backward<T>(                                      \
        const TensorT<T>&, const OffsetFieldT<T>&, const ConvParamsT<T>&, const TensorT<T>&);  \
    template ValidityMaskT<T> validity_mask<T>(const OffsetFieldT<T>&, int, int);              \
    template ValidityMaskT<T> upsample_mask<T>(const ValidityMaskT<T>&, int);

SDAN_INSTANTIATE_DEFORM(float)
SDAN_INSTANTIATE_DEFORM(double)

}  // namespace sdan
