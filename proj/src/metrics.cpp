#include "sdan/metrics.hpp"

#include <cmath>

namespace sdan {

namespace {

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimError("psnr: " + a.shape_str() + " vs " + b.shape_str());
    if (a.data.empty()) throw DimError("psnr: empty tensors");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> gaussian_kernel_1d() {
    std::vector<double> k(kSsimWindow);
    const int r = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        double d = i - r;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable valid-mode Gaussian filter on an (h, w) plane.
void gauss_filter_valid(const std::vector<double>& src, int h, int w,
                        const std::vector<double>& k, std::vector<double>& dst, int& oh,
                        int& ow) {
    const int win = static_cast<int>(k.size());
    ow = w - win + 1;
    oh = h - win + 1;
    std::vector<double> horiz(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < win; ++i) acc += k[i] * src[y * w + x + i];
            horiz[y * ow + x] = acc;
        }
    dst.assign(static_cast<size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < win; ++i) acc += k[i] * horiz[(y + i) * ow + x];
            dst[y * ow + x] = acc;
        }
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    double m = mse(a, b);
    if (m == 0.0) return 99.0;
    return 10.0 * std::log10(peak * peak / m);
}

double psnr_masked(const Tensor& a, const Tensor& b, const Tensor& mask, double peak) {
    if (!a.same_shape(b)) throw DimError("psnr_masked: shape mismatch");
    if (mask.h != a.h || mask.w != a.w || mask.n != a.n)
        throw DimError("psnr_masked: mask shape mismatch");
    double acc = 0.0;
    long count = 0;
    for (int s = 0; s < a.n; ++s) {
        const float* m = mask.plane(s, 0);
        for (int ch = 0; ch < a.c; ++ch) {
            const float* pa = a.plane(s, ch);
            const float* pb = b.plane(s, ch);
            for (int i = 0; i < a.h * a.w; ++i)
                if (m[i] != 0.f) {
                    double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
                    acc += d * d;
                    ++count;
                }
        }
    }
    if (count == 0) throw UndefinedResultError("psnr_masked: empty mask");
    double m = acc / static_cast<double>(count);
    if (m == 0.0) return 99.0;
    return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimError("ssim: " + a.shape_str() + " vs " + b.shape_str());
    if (a.h < kSsimWindow || a.w < kSsimWindow)
        throw DimError("ssim: image smaller than the 11x11 window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const auto kernel = gaussian_kernel_1d();
    const int hw = a.h * a.w;

    double total = 0.0;
    long maps = 0;
    std::vector<double> pa(hw), pb(hw), paa(hw), pbb(hw), pab(hw);
    std::vector<double> mu_a, mu_b, m_aa, m_bb, m_ab;
    for (int s = 0; s < a.n; ++s)
        for (int ch = 0; ch < a.c; ++ch) {
            const float* xa = a.plane(s, ch);
            const float* xb = b.plane(s, ch);
            for (int i = 0; i < hw; ++i) {
                pa[i] = xa[i];
                pb[i] = xb[i];
                paa[i] = pa[i] * pa[i];
                pbb[i] = pb[i] * pb[i];
                pab[i] = pa[i] * pb[i];
            }
            int oh = 0, ow = 0;
            gauss_filter_valid(pa, a.h, a.w, kernel, mu_a, oh, ow);
            gauss_filter_valid(pb, a.h, a.w, kernel, mu_b, oh, ow);
            gauss_filter_valid(paa, a.h, a.w, kernel, m_aa, oh, ow);
            gauss_filter_valid(pbb, a.h, a.w, kernel, m_bb, oh, ow);
            gauss_filter_valid(pab, a.h, a.w, kernel, m_ab, oh, ow);
            for (int i = 0; i < oh * ow; ++i) {
                double ma = mu_a[i], mb = mu_b[i];
                double va = m_aa[i] - ma * ma;
                double vb = m_bb[i] - mb * mb;
                double cov = m_ab[i] - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++maps;
            }
        }
    return total / static_cast<double>(maps);
}

FeatureSet patch_features(const Tensor& img, int patch, int stride) {
    if (patch <= 0 || stride <= 0) throw ConfigError("patch_features: bad patch/stride");
    if (img.h < patch || img.w < patch)
        throw DimError("patch_features: image smaller than patch");
    FeatureSet set;
    for (int s = 0; s < img.n; ++s)
        for (int y = 0; y + patch <= img.h; y += stride)
            for (int x = 0; x + patch <= img.w; x += stride) {
                std::vector<double> v;
                v.reserve(static_cast<size_t>(patch) * patch * img.c);
                for (int ch = 0; ch < img.c; ++ch)
                    for (int py = 0; py < patch; ++py)
                        for (int px = 0; px < patch; ++px)
                            v.push_back(img.at(s, ch, y + py, x + px));
                set.points.push_back(std::move(v));
            }
    return set;
}

double contextual_distance(const FeatureSet& x_feats, const FeatureSet& y_feats) {
    if (x_feats.points.empty() || y_feats.points.empty())
        throw UndefinedResultError("contextual_distance: empty feature set");
    const size_t d = x_feats.points.front().size();
    for (const auto& p : x_feats.points)
        if (p.size() != d) throw DimError("contextual_distance: ragged x features");
    for (const auto& p : y_feats.points)
        if (p.size() != d) throw DimError("contextual_distance: feature dimension mismatch");

    // Center both sets by the mean of the target set.
    std::vector<double> mu(d, 0.0);
    for (const auto& p : y_feats.points)
        for (size_t i = 0; i < d; ++i) mu[i] += p[i];
    for (auto& v : mu) v /= static_cast<double>(y_feats.points.size());

    auto centered = [&](const std::vector<double>& p) {
        std::vector<double> c(d);
        for (size_t i = 0; i < d; ++i) c[i] = p[i] - mu[i];
        return c;
    };
    std::vector<std::vector<double>> ys;
    std::vector<double> ynorm;
    ys.reserve(y_feats.points.size());
    for (const auto& p : y_feats.points) {
        ys.push_back(centered(p));
        double n = 0.0;
        for (double v : ys.back()) n += v * v;
        ynorm.push_back(std::sqrt(n));
    }

    constexpr double kZeroNorm = 1e-12;
    double total = 0.0;
    for (const auto& px : x_feats.points) {
        std::vector<double> cx = centered(px);
        double nx = 0.0;
        for (double v : cx) nx += v * v;
        nx = std::sqrt(nx);
        double best = 2.0;  // cosine distance upper bound
        for (size_t j = 0; j < ys.size(); ++j) {
            double dist;
            bool zx = nx < kZeroNorm, zy = ynorm[j] < kZeroNorm;
            if (zx && zy)
                dist = 0.0;
            else if (zx || zy)
                dist = 1.0;
            else {
                double dot = 0.0;
                for (size_t i = 0; i < d; ++i) dot += cx[i] * ys[j][i];
                dist = 1.0 - dot / (nx * ynorm[j]);
            }
            if (dist < best) best = dist;
        }
        total += best;
    }
    return total / static_cast<double>(x_feats.points.size());
}

}  // namespace sdan
