#pragma once

#include <vector>

#include "sdan/tensor.hpp"

namespace sdan {

// 10*log10(peak^2 / MSE); exact-zero MSE returns the 99.0 dB sentinel.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mask-gated variant used by the evaluation protocol: MSE over positions
// where mask (n,1,h,w) is 1, all channels.
double psnr_masked(const Tensor& a, const Tensor& b, const Tensor& mask, double peak = 1.0);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03,
// peak 1. Channels are averaged.
double ssim(const Tensor& a, const Tensor& b);

// Feature point set for the contextual distance. All vectors share one
// dimension.
struct FeatureSet {
    std::vector<std::vector<double>> points;
};

// 3x3 (by default) patch descriptors on a stride grid; d = patch^2 * c.
FeatureSet patch_features(const Tensor& img, int patch = 3, int stride = 1);

// mean_i min_j dist(x_i, y_j) with cosine distance after subtracting the
// mean of the y set. A zero vector is at distance 1 from everything except
// another zero vector. Not symmetric.
double contextual_distance(const FeatureSet& x_feats, const FeatureSet& y_feats);

}  // namespace sdan
