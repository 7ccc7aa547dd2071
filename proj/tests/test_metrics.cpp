#include <doctest.h>

#include "oracles.hpp"
#include "sdan/metrics.hpp"

using namespace sdan;

TEST_CASE("psnr basics") {
    std::mt19937_64 rng(61);
    Tensor a = oracle::rand_tensor<float>(rng, 1, 3, 8, 8, 0.0, 1.0);
    CHECK(psnr(a, a) == doctest::Approx(99.0));

    Tensor b = a;
    for (auto& v : b.data) v += 0.1f;
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));

    Tensor c = oracle::rand_tensor<float>(rng, 1, 3, 8, 8, 0.0, 1.0);
    double want = 10.0 * std::log10(1.0 / oracle::mse_direct(a, c));
    CHECK(psnr(a, c) == doctest::Approx(want).epsilon(1e-9));
    CHECK(psnr(a, c) == doctest::Approx(psnr(c, a)));

    Tensor d(1, 3, 8, 7);
    CHECK_THROWS_AS(psnr(a, d), DimError);
}

TEST_CASE("psnr is strictly decreasing in MSE") {
    Tensor a = Tensor::zeros(1, 1, 4, 4);
    double prev = 1e9;
    for (float diff : {0.01f, 0.05f, 0.1f, 0.4f}) {
        Tensor b = Tensor::full(1, 1, 4, 4, diff);
        double v = psnr(a, b);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("ssim basics") {
    std::mt19937_64 rng(62);
    Tensor a = oracle::rand_tensor<float>(rng, 1, 1, 16, 16, 0.0, 1.0);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    Tensor zero = Tensor::zeros(1, 1, 16, 16);
    Tensor one = Tensor::full(1, 1, 16, 16, 1.f);
    // closed form for constant images: C1 / (1 + C1)
    CHECK(ssim(zero, one) == doctest::Approx(1e-4 / 1.0001).epsilon(1e-6));

    Tensor small(1, 1, 8, 8);
    CHECK_THROWS_AS(ssim(small, small), DimError);
}

TEST_CASE("ssim matches the brute-force windowed oracle and is symmetric") {
    std::mt19937_64 rng(63);
    Tensor a = oracle::rand_tensor<float>(rng, 1, 2, 14, 13, 0.0, 1.0);
    Tensor b = oracle::rand_tensor<float>(rng, 1, 2, 14, 13, 0.0, 1.0);
    CHECK(ssim(a, b) == doctest::Approx(oracle::ssim_direct(a, b)).epsilon(1e-6));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-9));
}

TEST_CASE("contextual distance basics") {
    FeatureSet x{{{1.0, 0.0, 2.0}, {0.0, 1.0, -1.0}}};
    CHECK(contextual_distance(x, x) == doctest::Approx(0.0).epsilon(1e-12));

    FeatureSet perm{{{0.0, 1.0, -1.0}, {1.0, 0.0, 2.0}}};
    CHECK(contextual_distance(x, perm) == doctest::Approx(0.0).epsilon(1e-12));

    // orthogonal single-vector sets
    FeatureSet u{{{1.0, 0.0}}};
    FeatureSet v{{{0.0, 1.0}}};
    CHECK(contextual_distance(u, v) == doctest::Approx(1.0));

    FeatureSet empty;
    CHECK_THROWS_AS(contextual_distance(empty, x), UndefinedResultError);
}

TEST_CASE("contextual distance: containment gives zero, but it is not symmetric") {
    FeatureSet x{{{1.0, 2.0, 3.0}}};
    FeatureSet y{{{1.0, 2.0, 3.0}, {10.0, -4.0, 0.5}}};
    CHECK(contextual_distance(x, y) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(contextual_distance(y, x) > 0.05);
}

TEST_CASE("contextual distance is invariant to shuffling the target set") {
    std::mt19937_64 rng(64);
    std::vector<std::vector<double>> xs, ys;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> p(5), q(5);
        for (auto& v : p) v = 2.0 * Tensor::unit_real(rng) - 1.0;
        for (auto& v : q) v = 2.0 * Tensor::unit_real(rng) - 1.0;
        xs.push_back(p);
        ys.push_back(q);
    }
    FeatureSet fx{xs}, fy{ys};
    double base = contextual_distance(fx, fy);
    CHECK(base == doctest::Approx(oracle::cx_direct(xs, ys)).epsilon(1e-12));
    std::reverse(ys.begin(), ys.end());
    std::swap(ys[0], ys[2]);
    FeatureSet fy2{ys};
    CHECK(contextual_distance(fx, fy2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("patch_features dimensions") {
    std::mt19937_64 rng(65);
    Tensor img = oracle::rand_tensor<float>(rng, 1, 3, 8, 8);
    FeatureSet f = patch_features(img, 3, 1);
    CHECK(f.points.size() == 36);
    CHECK(f.points.front().size() == 27);
    FeatureSet strided = patch_features(img, 3, 2);
    CHECK(strided.points.size() == 9);
}
