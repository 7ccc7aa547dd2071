// Brute-force reference implementations used as independent oracles. These
// deliberately share no code with the library kernels they check.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "sdan/tensor.hpp"

namespace oracle {

template <typename T>
sdan::TensorT<T> rand_tensor(std::mt19937_64& rng, int n, int c, int h, int w, double lo = -1.0,
                             double hi = 1.0) {
    sdan::TensorT<T> t(n, c, h, w);
    for (auto& v : t.data)
        v = static_cast<T>(lo + (hi - lo) * sdan::Tensor::unit_real(rng));
    return t;
}

template <typename T>
double max_abs_diff(const sdan::TensorT<T>& a, const sdan::TensorT<T>& b) {
    if (!a.same_shape(b)) return 1e30;
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
    return m;
}

// Direct nested-loop convolution with zero padding.
template <typename T>
sdan::TensorT<T> conv2d_direct(const sdan::TensorT<T>& x, const sdan::TensorT<T>& weight,
                               const sdan::TensorT<T>& bias, int stride, int pad) {
    const int k = weight.h;
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    sdan::TensorT<T> out(x.n, weight.n, oh, ow);
    for (int s = 0; s < x.n; ++s)
        for (int oc = 0; oc < weight.n; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias.at(0, oc, 0, 0);
                    for (int ic = 0; ic < x.c; ++ic)
                        for (int ki = 0; ki < k; ++ki)
                            for (int kj = 0; kj < k; ++kj) {
                                int iy = oy * stride - pad + ki;
                                int ix = ox * stride - pad + kj;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += double(x.at(s, ic, iy, ix)) *
                                       double(weight.at(oc, ic, ki, kj));
                            }
                    out.at(s, oc, oy, ox) = static_cast<T>(acc);
                }
    return out;
}

template <typename T>
double mean_direct(const sdan::TensorT<T>& x, int s, int c) {
    double acc = 0.0;
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) acc += x.at(s, c, y, xx);
    return acc / (double(x.h) * x.w);
}

inline double l1_direct(const sdan::Tensor& a, const sdan::Tensor& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        acc += std::abs(double(a.data[i]) - double(b.data[i]));
    return acc / double(a.data.size());
}

inline double mse_direct(const sdan::Tensor& a, const sdan::Tensor& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = double(a.data[i]) - double(b.data[i]);
        acc += d * d;
    }
    return acc / double(a.data.size());
}

// Direct 11x11 sliding-window SSIM, no separable shortcut.
inline double ssim_direct(const sdan::Tensor& a, const sdan::Tensor& b) {
    const int win = 11;
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    std::vector<double> k(win * win);
    double ksum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            double dy = i - win / 2, dx = j - win / 2;
            k[i * win + j] = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
            ksum += k[i * win + j];
        }
    for (auto& v : k) v /= ksum;

    double total = 0.0;
    long count = 0;
    for (int s = 0; s < a.n; ++s)
        for (int ch = 0; ch < a.c; ++ch)
            for (int y = 0; y + win <= a.h; ++y)
                for (int x = 0; x + win <= a.w; ++x) {
                    double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                    for (int i = 0; i < win; ++i)
                        for (int j = 0; j < win; ++j) {
                            double va = a.at(s, ch, y + i, x + j);
                            double vb = b.at(s, ch, y + i, x + j);
                            double wgt = k[i * win + j];
                            ma += wgt * va;
                            mb += wgt * vb;
                            maa += wgt * va * va;
                            mbb += wgt * vb * vb;
                            mab += wgt * va * vb;
                        }
                    double va = maa - ma * ma, vb = mbb - mb * mb, cov = mab - ma * mb;
                    total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                             ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    ++count;
                }
    return total / double(count);
}

// Pairwise-min contextual distance recomputed from scratch (target-mean
// centering, cosine distance, zero-vector rule).
inline double cx_direct(const std::vector<std::vector<double>>& xs,
                        const std::vector<std::vector<double>>& ys) {
    const size_t d = xs.front().size();
    std::vector<double> mu(d, 0.0);
    for (const auto& p : ys)
        for (size_t i = 0; i < d; ++i) mu[i] += p[i];
    for (auto& v : mu) v /= double(ys.size());
    double total = 0.0;
    for (const auto& px : xs) {
        double best = 1e30;
        for (const auto& py : ys) {
            double dot = 0, nx = 0, ny = 0;
            for (size_t i = 0; i < d; ++i) {
                double cx = px[i] - mu[i], cy = py[i] - mu[i];
                dot += cx * cy;
                nx += cx * cx;
                ny += cy * cy;
            }
            double dist;
            if (nx < 1e-24 && ny < 1e-24)
                dist = 0.0;
            else if (nx < 1e-24 || ny < 1e-24)
                dist = 1.0;
            else
                dist = 1.0 - dot / std::sqrt(nx * ny);
            best = std::min(best, dist);
        }
        total += best;
    }
    return total / double(xs.size());
}

}  // namespace oracle
