#include <doctest.h>

#include "oracles.hpp"
#include "sdan/ops.hpp"

using namespace sdan;

namespace {

ConvParams conv_of(Tensor w, int stride = 1, int pad = 0) {
    ConvParams p;
    p.bias = Tensor::zeros(1, w.n, 1, 1);
    p.weight = std::move(w);
    p.stride = stride;
    p.pad = pad;
    return p;
}

}  // namespace

TEST_CASE("conv2d: all-ones 3x3 under zero padding") {
    ConvParams p = conv_of(Tensor::full(1, 1, 3, 3, 1.f), 1, 1);
    Tensor x = Tensor::full(1, 1, 3, 3, 1.f);
    Tensor out = conv2d(x, p);
    CHECK(out.at(0, 0, 1, 1) == doctest::Approx(9.0));
    CHECK(out.at(0, 0, 0, 0) == doctest::Approx(4.0));
    CHECK(out.at(0, 0, 0, 1) == doctest::Approx(6.0));
}

TEST_CASE("conv2d: delta kernel is the identity") {
    std::mt19937_64 rng(11);
    Tensor x = oracle::rand_tensor<float>(rng, 2, 3, 6, 5);
    Tensor w = Tensor::zeros(3, 3, 3, 3);
    for (int c = 0; c < 3; ++c) w.at(c, c, 1, 1) = 1.f;
    Tensor out = conv2d(x, conv_of(std::move(w), 1, 1));
    CHECK(oracle::max_abs_diff(out, x) == 0.0);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        int k = 1 + 2 * int(rng() % 2);
        int stride = 1 + int(rng() % 2);
        int pad = int(rng() % (k / 2 + 1));
        int oh = 1 + int(rng() % 4), ow = 1 + int(rng() % 4);
        int h = (oh - 1) * stride + k - 2 * pad, w = (ow - 1) * stride + k - 2 * pad;
        if (h < 1 || w < 1) continue;
        Tensor x = oracle::rand_tensor<float>(rng, 1 + int(rng() % 2), 2, h, w);
        ConvParams p;
        p.weight = oracle::rand_tensor<float>(rng, 3, 2, k, k);
        p.bias = oracle::rand_tensor<float>(rng, 1, 3, 1, 1);
        p.stride = stride;
        p.pad = pad;
        Tensor got = conv2d(x, p);
        Tensor want = oracle::conv2d_direct(x, p.weight, p.bias, stride, pad);
        CHECK(oracle::max_abs_diff(got, want) <= 1e-6);
    }
}

TEST_CASE("conv2d rejects bad geometry") {
    std::mt19937_64 rng(13);
    Tensor x = oracle::rand_tensor<float>(rng, 1, 2, 5, 5);
    ConvParams even = conv_of(Tensor::full(1, 2, 2, 2, 1.f));
    CHECK_THROWS_AS(conv2d(x, even), ConfigError);
    ConvParams wrong_c = conv_of(Tensor::full(1, 3, 3, 3, 1.f));
    CHECK_THROWS_AS(conv2d(x, wrong_c), DimError);
    // inexact output division: (6 - 3) % 2 != 0
    ConvParams bad_stride = conv_of(Tensor::full(1, 2, 3, 3, 1.f), 2, 0);
    Tensor x6 = oracle::rand_tensor<float>(rng, 1, 2, 6, 6);
    CHECK_THROWS_AS(conv2d(x6, bad_stride), DimError);
}

TEST_CASE("conv2d is linear in its input") {
    std::mt19937_64 rng(14);
    Tensor a = oracle::rand_tensor<float>(rng, 1, 2, 6, 6);
    Tensor b = oracle::rand_tensor<float>(rng, 1, 2, 6, 6);
    ConvParams p = conv_of(oracle::rand_tensor<float>(rng, 3, 2, 3, 3), 1, 1);
    const float alpha = 0.7f, beta = -1.3f;
    Tensor mix(1, 2, 6, 6);
    for (size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = alpha * a.data[i] + beta * b.data[i];
    Tensor lhs = conv2d(mix, p);
    Tensor ca = conv2d(a, p), cb = conv2d(b, p);
    Tensor rhs(lhs.n, lhs.c, lhs.h, lhs.w);
    for (size_t i = 0; i < rhs.data.size(); ++i)
        rhs.data[i] = alpha * ca.data[i] + beta * cb.data[i];
    CHECK(oracle::max_abs_diff(lhs, rhs) <= 1e-5);
}

TEST_CASE("conv2d_backward: zero grad_out gives zero gradients") {
    std::mt19937_64 rng(15);
    Tensor x = oracle::rand_tensor<float>(rng, 1, 2, 5, 5);
    ConvParams p = conv_of(oracle::rand_tensor<float>(rng, 2, 2, 3, 3), 1, 1);
    auto g = conv2d_backward(x, p, Tensor::zeros(1, 2, 5, 5));
    CHECK(oracle::max_abs_diff(g.input, Tensor::zeros(1, 2, 5, 5)) == 0.0);
    CHECK(oracle::max_abs_diff(g.weight, Tensor::zeros(2, 2, 3, 3)) == 0.0);
    CHECK(oracle::max_abs_diff(g.bias, Tensor::zeros(1, 2, 1, 1)) == 0.0);
}

TEST_CASE("conv2d_backward: delta kernel adjoint is the identity") {
    std::mt19937_64 rng(16);
    Tensor x = oracle::rand_tensor<float>(rng, 1, 2, 5, 5);
    Tensor w = Tensor::zeros(2, 2, 3, 3);
    for (int c = 0; c < 2; ++c) w.at(c, c, 1, 1) = 1.f;
    ConvParams p = conv_of(std::move(w), 1, 1);
    Tensor g = oracle::rand_tensor<float>(rng, 1, 2, 5, 5);
    auto grads = conv2d_backward(x, p, g);
    CHECK(oracle::max_abs_diff(grads.input, g) == 0.0);
}

// Central finite differences in double, the spec's stated protocol
// (eps = 1e-3, 64-bit accumulation, tolerance 1e-5 relative).
TEST_CASE("conv2d_backward matches finite differences") {
    std::mt19937_64 rng(17);
    TensorD x = oracle::rand_tensor<double>(rng, 1, 2, 4, 4);
    ConvParamsT<double> p;
    p.weight = oracle::rand_tensor<double>(rng, 2, 2, 3, 3);
    p.bias = oracle::rand_tensor<double>(rng, 1, 2, 1, 1);
    p.stride = 1;
    p.pad = 1;
    TensorD g = oracle::rand_tensor<double>(rng, 1, 2, 4, 4);

    auto grads = conv2d_backward(x, p, g);
    auto loss = [&] {
        TensorD out = conv2d(x, p);
        double acc = 0.0;
        for (size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * g.data[i];
        return acc;
    };
    const double eps = 1e-3;
    auto check_all = [&](std::vector<double>& vals, const std::vector<double>& analytic) {
        for (size_t i = 0; i < vals.size(); ++i) {
            double saved = vals[i];
            vals[i] = saved + eps;
            double up = loss();
            vals[i] = saved - eps;
            double down = loss();
            vals[i] = saved;
            double fd = (up - down) / (2 * eps);
            double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
            CHECK(std::abs(fd - analytic[i]) / denom <= 1e-5);
        }
    };
    check_all(x.data, grads.input.data);
    check_all(p.weight.data, grads.weight.data);
    check_all(p.bias.data, grads.bias.data);
}

TEST_CASE("activation basics") {
    Tensor x = Tensor::from_data(1, 1, 1, 3, {-1.f, 0.f, 2.f});
    Tensor r = activation(x, Act::relu);
    CHECK(r.data[0] == 0.f);
    CHECK(r.data[1] == 0.f);
    CHECK(r.data[2] == 2.f);
    Tensor s = activation(Tensor::zeros(1, 1, 1, 1), Act::sigmoid);
    CHECK(s.data[0] == doctest::Approx(0.5));

    // relu' at exactly 0 is pinned to 0
    Tensor g = Tensor::full(1, 1, 1, 3, 1.f);
    Tensor back = activation_backward(x, Act::relu, g);
    CHECK(back.data[1] == 0.f);
}

TEST_CASE("activation backward matches finite differences away from the kink") {
    std::mt19937_64 rng(18);
    for (Act kind : {Act::relu, Act::sigmoid}) {
        TensorD x = oracle::rand_tensor<double>(rng, 1, 2, 4, 4);
        if (kind == Act::relu)
            for (auto& v : x.data)
                while (std::abs(v) < 1e-4) v = 2.0 * Tensor::unit_real(rng) - 1.0;
        TensorD g = oracle::rand_tensor<double>(rng, 1, 2, 4, 4);
        TensorD analytic = activation_backward(x, kind, g);
        const double eps = 1e-5;
        for (size_t i = 0; i < x.data.size(); ++i) {
            double saved = x.data[i];
            x.data[i] = saved + eps;
            TensorD up = activation(x, kind);
            x.data[i] = saved - eps;
            TensorD down = activation(x, kind);
            x.data[i] = saved;
            double fd = 0.0;
            for (size_t j = 0; j < up.data.size(); ++j)
                fd += (up.data[j] - down.data[j]) * g.data[j];
            fd /= 2 * eps;
            double denom = std::max({std::abs(fd), std::abs(analytic.data[i]), 1e-6});
            CHECK(std::abs(fd - analytic.data[i]) / denom <= 1e-5);
        }
    }
}

TEST_CASE("space_to_depth pinned layout") {
    std::vector<float> vals(16);
    for (int i = 0; i < 16; ++i) vals[i] = float(i);
    Tensor x = Tensor::from_data(1, 1, 4, 4, vals);
    Tensor out = space_to_depth(x, 2);
    REQUIRE(out.c == 4);
    REQUIRE(out.h == 2);
    REQUIRE(out.w == 2);
    // channel 0 carries phase (ky=0, kx=0)
    CHECK(out.at(0, 0, 0, 0) == 0.f);
    CHECK(out.at(0, 0, 0, 1) == 2.f);
    CHECK(out.at(0, 0, 1, 0) == 8.f);
    CHECK(out.at(0, 0, 1, 1) == 10.f);
    // channel ky*K+kx ordering
    CHECK(out.at(0, 1, 0, 0) == 1.f);   // (0,1)
    CHECK(out.at(0, 2, 0, 0) == 4.f);   // (1,0)
    CHECK(out.at(0, 3, 0, 0) == 5.f);   // (1,1)
}

TEST_CASE("space_to_depth K=1 is the identity") {
    std::mt19937_64 rng(19);
    Tensor x = oracle::rand_tensor<float>(rng, 2, 3, 4, 4);
    CHECK(oracle::max_abs_diff(space_to_depth(x, 1), x) == 0.0);
    CHECK(oracle::max_abs_diff(depth_to_space(x, 1), x) == 0.0);
}

TEST_CASE("packing matches the paper's dimension arithmetic") {
    // 2C-channel feature with C=8 at 8x8, K=4 packs to (2*8*16) x 2 x 2.
    std::mt19937_64 rng(20);
    Tensor f = oracle::rand_tensor<float>(rng, 1, 16, 8, 8);
    Tensor packed = space_to_depth(f, 4);
    CHECK(packed.c == 256);
    CHECK(packed.h == 2);
    CHECK(packed.w == 2);
}

TEST_CASE("depth_to_space inverts space_to_depth bit-exactly") {
    std::mt19937_64 rng(21);
    for (int K : {2, 4}) {
        Tensor x = oracle::rand_tensor<float>(rng, 2, 3, 8, 8);
        Tensor rt = depth_to_space(space_to_depth(x, K), K);
        CHECK(oracle::max_abs_diff(rt, x) == 0.0);
        Tensor y = oracle::rand_tensor<float>(rng, 1, 3 * K * K, 2, 2);
        Tensor rt2 = space_to_depth(depth_to_space(y, K), K);
        CHECK(oracle::max_abs_diff(rt2, y) == 0.0);
    }
}

TEST_CASE("depth_to_space pinned layout on a 1x4x1x1 input") {
    Tensor x = Tensor::from_data(1, 4, 1, 1, {10.f, 11.f, 12.f, 13.f});
    Tensor out = depth_to_space(x, 2);
    REQUIRE(out.c == 1);
    CHECK(out.at(0, 0, 0, 0) == 10.f);
    CHECK(out.at(0, 0, 0, 1) == 11.f);
    CHECK(out.at(0, 0, 1, 0) == 12.f);
    CHECK(out.at(0, 0, 1, 1) == 13.f);
}

TEST_CASE("packing dimension errors") {
    Tensor x(1, 1, 5, 4);
    CHECK_THROWS_AS(space_to_depth(x, 2), DimError);
    Tensor y(1, 3, 2, 2);
    CHECK_THROWS_AS(depth_to_space(y, 2), DimError);
}

TEST_CASE("global_avg_pool") {
    CHECK(global_avg_pool(Tensor::full(2, 3, 4, 5, 0.25f)).at(1, 2, 0, 0) ==
          doctest::Approx(0.25));
    Tensor x = Tensor::from_data(1, 1, 2, 2, {1.f, 2.f, 3.f, 4.f});
    CHECK(global_avg_pool(x).at(0, 0, 0, 0) == doctest::Approx(2.5));

    std::mt19937_64 rng(22);
    Tensor r = oracle::rand_tensor<float>(rng, 2, 3, 6, 7);
    Tensor pooled = global_avg_pool(r);
    for (int s = 0; s < 2; ++s)
        for (int c = 0; c < 3; ++c)
            CHECK(pooled.at(s, c, 0, 0) ==
                  doctest::Approx(oracle::mean_direct(r, s, c)).epsilon(1e-6));
}

TEST_CASE("concat_channels") {
    std::mt19937_64 rng(23);
    Tensor a = oracle::rand_tensor<float>(rng, 1, 3, 4, 4);
    Tensor empty(1, 0, 4, 4);
    CHECK(oracle::max_abs_diff(concat_channels(a, empty), a) == 0.0);

    Tensor b = oracle::rand_tensor<float>(rng, 1, 3, 4, 4);
    Tensor cat = concat_channels(a, b);
    REQUIRE(cat.c == 6);
    CHECK(cat.at(0, 0, 2, 2) == a.at(0, 0, 2, 2));
    CHECK(cat.at(0, 3, 2, 2) == b.at(0, 0, 2, 2));

    Tensor g = oracle::rand_tensor<float>(rng, 1, 6, 4, 4);
    auto [ga, gb] = concat_channels_backward(g, 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(ga.at(0, c, 1, 1) == g.at(0, c, 1, 1));
        CHECK(gb.at(0, c, 1, 1) == g.at(0, c + 3, 1, 1));
    }

    Tensor bad = oracle::rand_tensor<float>(rng, 1, 3, 5, 4);
    CHECK_THROWS_AS(concat_channels(a, bad), DimError);
}

TEST_CASE("flip basics and involution") {
    Tensor x = Tensor::from_data(1, 1, 1, 3, {1.f, 2.f, 3.f});
    Tensor fh = flip(x, FlipH);
    CHECK(fh.data[0] == 3.f);
    CHECK(fh.data[1] == 2.f);
    CHECK(fh.data[2] == 1.f);

    std::mt19937_64 rng(24);
    Tensor r = oracle::rand_tensor<float>(rng, 2, 2, 5, 4);
    for (unsigned axes : {FlipH, FlipV, FlipHV})
        CHECK(oracle::max_abs_diff(flip(flip(r, axes), axes), r) == 0.0);
    // distinct axes commute, and together equal the combined flip
    Tensor hv = flip(flip(r, FlipH), FlipV);
    Tensor vh = flip(flip(r, FlipV), FlipH);
    CHECK(oracle::max_abs_diff(hv, vh) == 0.0);
    CHECK(oracle::max_abs_diff(hv, flip(r, FlipHV)) == 0.0);
}

TEST_CASE("box_downsample averages blocks") {
    Tensor x = Tensor::from_data(1, 1, 2, 2, {1.f, 3.f, 5.f, 7.f});
    Tensor d = box_downsample(x, 2);
    CHECK(d.at(0, 0, 0, 0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(box_downsample(Tensor(1, 1, 3, 3), 2), DimError);
}
