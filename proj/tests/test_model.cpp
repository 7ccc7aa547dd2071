#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "sdan/model.hpp"

using namespace sdan;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.in_channels = 3;
    cfg.base_channels = 8;
    cfg.num_res_blocks = 1;
    cfg.scale = 2;
    cfg.pack_k = 2;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("forward shape contract across random small configs") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 12; ++trial) {
        ModelConfig cfg;
        cfg.in_channels = (rng() % 2) ? 3 : 4;
        cfg.base_channels = 4 + 4 * int(rng() % 2);
        cfg.num_res_blocks = 1 + int(rng() % 2);
        cfg.scale = 1 << (rng() % 3);
        cfg.offset_mode = (rng() % 2) ? OffsetMode::squared : OffsetMode::per_point;
        cfg.attention = static_cast<AttentionKind>(rng() % 3);
        cfg.flip_aug = rng() % 2;
        cfg.align_enabled = rng() % 2;
        cfg.pack_k = 2;
        cfg.seed = rng();
        SdanModel m = make_model<float>(cfg);
        const int h = 8, w = 8;
        Tensor x = oracle::rand_tensor<float>(rng, 1, cfg.in_channels, h, w, 0.0, 1.0);
        Tensor yref = oracle::rand_tensor<float>(rng, 1, cfg.in_channels, h, w, 0.0, 1.0);
        ForwardOutput out = forward(m, x, yref);
        const int f = cfg.hr_factor();
        CHECK(out.zoomed.n == 1);
        CHECK(out.zoomed.c == 3);
        CHECK(out.zoomed.h == f * h);
        CHECK(out.zoomed.w == f * w);
        CHECK(out.aligned.c == cfg.in_channels);
        CHECK(out.aligned.h == h);
        CHECK(out.mask_lr.data.h == h);
        CHECK(out.mask_hr.data.h == f * h);
        for (float v : out.mask_lr.data.data) CHECK((v == 0.f || v == 1.f));
        for (float v : out.mask_hr.data.data) CHECK((v == 0.f || v == 1.f));
    }
}

TEST_CASE("fresh model on X == Yref: zero offsets, full masks, plain conv") {
    std::mt19937_64 rng(72);
    SdanModel m = make_model<float>(tiny_config(7));
    Tensor x = oracle::rand_tensor<float>(rng, 1, 3, 8, 8, 0.0, 1.0);
    ModelTapeT<float> tape;
    ForwardOutput out = forward(m, x, x, &tape);
    for (float v : out.offsets.data.data) CHECK(v == 0.f);
    for (float v : out.mask_lr.data.data) CHECK(v == 1.f);
    Tensor plain = conv2d(tape.fx, m.dcn);
    CHECK(oracle::max_abs_diff(tape.fxp, plain) <= 1e-6);
}

TEST_CASE("paper geometry: 64x64 at 4x yields 256x256 with LR-sized extras") {
    ModelConfig cfg;
    cfg.in_channels = 3;
    cfg.base_channels = 8;
    cfg.num_res_blocks = 1;
    cfg.scale = 4;
    cfg.pack_k = 4;
    cfg.seed = 3;
    SdanModel m = make_model<float>(cfg);
    std::mt19937_64 rng(73);
    Tensor x = oracle::rand_tensor<float>(rng, 1, 3, 64, 64, 0.0, 1.0);
    Tensor yref = oracle::rand_tensor<float>(rng, 1, 3, 64, 64, 0.0, 1.0);
    ForwardOutput out = forward(m, x, yref);
    CHECK(out.zoomed.h == 256);
    CHECK(out.zoomed.w == 256);
    CHECK(out.aligned.h == 64);
    CHECK(out.mask_hr.data.h == 256);
    CHECK(out.mask_lr.data.h == 64);
    CHECK(out.offsets.data.c == 2);
}

TEST_CASE("align-disabled forward is bit-exactly invariant to Yref") {
    std::mt19937_64 rng(74);
    ModelConfig cfg = tiny_config(9);
    cfg.align_enabled = false;
    SdanModel m = make_model<float>(cfg);
    Tensor x = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.0, 1.0);
    Tensor y1 = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.0, 1.0);
    Tensor y2 = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.0, 1.0);
    ForwardOutput a = forward(m, x, y1);
    ForwardOutput b = forward(m, x, y2);
    CHECK(oracle::max_abs_diff(a.zoomed, b.zoomed) == 0.0);
    CHECK(oracle::max_abs_diff(a.aligned, b.aligned) == 0.0);
    for (float v : a.mask_hr.data.data) CHECK(v == 1.f);
}

TEST_CASE("flip_aug off and X == Yref: both feature branches identical") {
    std::mt19937_64 rng(75);
    ModelConfig cfg = tiny_config(11);
    cfg.flip_aug = false;
    SdanModel m = make_model<float>(cfg);
    Tensor x = oracle::rand_tensor<float>(rng, 1, 3, 8, 8, 0.0, 1.0);
    ModelTapeT<float> tape;
    forward(m, x, x, &tape);
    CHECK(oracle::max_abs_diff(tape.fx, tape.fy) == 0.0);
}

TEST_CASE("infer equals forward(X, X).zoomed and stays finite on flat input") {
    std::mt19937_64 rng(76);
    SdanModel m = make_model<float>(tiny_config(13));
    Tensor x = oracle::rand_tensor<float>(rng, 1, 3, 8, 8, 0.0, 1.0);
    Tensor via_infer = infer(m, x);
    Tensor via_forward = forward(m, x, x).zoomed;
    CHECK(oracle::max_abs_diff(via_infer, via_forward) == 0.0);

    Tensor gray = Tensor::full(1, 3, 8, 8, 0.5f);
    ForwardOutput out = forward(m, gray, gray);
    for (float v : out.zoomed.data) CHECK(std::isfinite(v));
    for (float v : out.mask_lr.data.data) CHECK(v == 1.f);
}

TEST_CASE("l1_loss") {
    std::mt19937_64 rng(77);
    Tensor a = oracle::rand_tensor<float>(rng, 1, 3, 5, 5);
    CHECK(l1_loss(a, a) == doctest::Approx(0.0));
    Tensor b = a;
    for (auto& v : b.data) v += 0.5f;
    CHECK(l1_loss(a, b) == doctest::Approx(0.5).epsilon(1e-6));
    Tensor c = oracle::rand_tensor<float>(rng, 1, 3, 5, 5);
    CHECK(l1_loss(a, c) == doctest::Approx(oracle::l1_direct(a, c)).epsilon(1e-7));
    CHECK_THROWS_AS(l1_loss(a, Tensor(1, 3, 5, 4)), DimError);
}

TEST_CASE("misaligned_l1") {
    std::mt19937_64 rng(78);
    Tensor a = oracle::rand_tensor<float>(rng, 1, 2, 6, 6);
    CHECK(misaligned_l1(a, a, 0, 0) == doctest::Approx(l1_loss(a, a)));

    // B = A shifted by one column: B(y,x) = A(y, x+1); F_R = (0, +1) compensates
    Tensor b(1, 2, 6, 6);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                b.at(0, c, y, x) = x + 1 < 6 ? a.at(0, c, y, x + 1) : 0.f;
    CHECK(misaligned_l1(a, b, 0, 1) == doctest::Approx(0.0));

    // analytic ramp: A(y,x) = x/w, shift by 2 -> 2/w everywhere valid
    const int w = 8;
    Tensor ramp(1, 1, 4, w);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < w; ++x) ramp.at(0, 0, y, x) = float(x) / w;
    CHECK(misaligned_l1(ramp, ramp, 0, 2) == doctest::Approx(2.0 / w).epsilon(1e-6));

    CHECK_THROWS_AS(misaligned_l1(a, a, 100, 0), UndefinedResultError);
}

TEST_CASE("masked_zoom_loss") {
    std::mt19937_64 rng(79);
    ForwardOutput out;
    out.aligned = oracle::rand_tensor<float>(rng, 1, 3, 2, 2);
    out.zoomed = oracle::rand_tensor<float>(rng, 1, 3, 4, 4);
    out.mask_lr = ValidityMask::ones(1, 2, 2);
    out.mask_hr = upsample_mask(out.mask_lr, 2);
    Tensor yref = out.aligned;
    Tensor y = out.zoomed;
    CHECK(masked_zoom_loss(out, y, yref) == doctest::Approx(0.0));

    // all-zero mask is an error, not silently zero
    ForwardOutput degenerate = out;
    degenerate.mask_lr.data = Tensor::zeros(1, 1, 2, 2);
    degenerate.mask_hr.data = Tensor::zeros(1, 1, 4, 4);
    CHECK_THROWS_AS(masked_zoom_loss(degenerate, y, yref), UndefinedResultError);

    // crafted half-valid 2x2 case, hand-summed
    ForwardOutput half;
    half.aligned = Tensor::from_data(1, 1, 2, 2, {1.f, 2.f, 3.f, 4.f});
    half.zoomed = Tensor::from_data(1, 1, 2, 2, {0.f, 0.f, 2.f, 2.f});
    half.mask_lr.data = Tensor::from_data(1, 1, 2, 2, {1.f, 0.f, 0.f, 1.f});
    half.mask_hr.data = Tensor::from_data(1, 1, 2, 2, {1.f, 1.f, 0.f, 0.f});
    Tensor yref2 = Tensor::from_data(1, 1, 2, 2, {0.5f, 9.f, 9.f, 5.f});
    Tensor y2 = Tensor::from_data(1, 1, 2, 2, {1.f, 0.25f, 9.f, 9.f});
    // term1: (|1-0.5| + |4-5|) / 2 = 0.75 ; term2: (|0-1| + |0-0.25|) / 2 = 0.625
    CHECK(masked_zoom_loss(half, y2, yref2) == doctest::Approx(1.375));
}

TEST_CASE("train_step with lr 0 leaves parameters bit-identical") {
    std::mt19937_64 rng(80);
    SdanModel m = make_model<float>(tiny_config(17));
    std::vector<float> before;
    visit_params(m, [&](const std::string&, Tensor& p) {
        before.insert(before.end(), p.data.begin(), p.data.end());
    });
    Tensor x = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.0, 1.0);
    Tensor yref = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.0, 1.0);
    Tensor y = oracle::rand_tensor<float>(rng, 2, 3, 16, 16, 0.0, 1.0);
    AdamState opt;
    AdamConfig cfg;
    cfg.lr = 0.0;
    train_step(m, x, y, yref, opt, cfg);
    std::vector<float> after;
    visit_params(m, [&](const std::string&, Tensor& p) {
        after.insert(after.end(), p.data.begin(), p.data.end());
    });
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

// Full-model analytic gradient vs central differences at the spec's spot
// tolerance (1e-3 relative, 64-bit, tiny config).
TEST_CASE("full-model loss gradient matches finite differences") {
    std::mt19937_64 rng(81);
    ModelConfig cfg = tiny_config(19);
    SdanModelT<double> m = make_model<double>(cfg);
    // dither the offset head away from integer sampling coordinates
    m.head.conv2.bias.data = {0.4, -0.35};

    TensorD x = oracle::rand_tensor<double>(rng, 1, 3, 8, 8, 0.05, 0.95);
    TensorD yref = oracle::rand_tensor<double>(rng, 1, 3, 8, 8, 0.05, 0.95);
    TensorD y = oracle::rand_tensor<double>(rng, 1, 3, 16, 16, 0.05, 0.95);

    ModelTapeT<double> tape;
    ForwardOutputT<double> out = forward(m, x, yref, &tape);
    zero_grads(m);
    auto [gz, ga] = masked_zoom_loss_backward(out, y, yref);
    backward(m, tape, out, gz, ga);

    auto loss = [&] { return masked_zoom_loss(forward(m, x, yref), y, yref); };
    std::vector<TensorT<double>*> params;
    visit_params(m, [&](const std::string&, TensorT<double>& p) { params.push_back(&p); });

    const double eps = 1e-6;
    int checked = 0;
    std::mt19937_64 pick(82);
    while (checked < 24) {
        TensorT<double>& p = *params[pick() % params.size()];
        size_t idx = pick() % p.data.size();
        double saved = p.data[idx];
        p.data[idx] = saved + eps;
        double up = loss();
        p.data[idx] = saved - eps;
        double down = loss();
        p.data[idx] = saved;
        double fd = (up - down) / (2 * eps);
        double analytic = p.grad[idx];
        double denom = std::max({std::abs(fd), std::abs(analytic), 1e-4});
        CHECK(std::abs(fd - analytic) / denom <= 1e-3);
        ++checked;
    }
}

TEST_CASE("overfitting one batch halves the loss within 200 steps") {
    std::mt19937_64 rng(83);
    SdanModel m = make_model<float>(tiny_config(23));
    Tensor x = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.1, 0.9);
    Tensor yref = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.1, 0.9);
    Tensor y = oracle::rand_tensor<float>(rng, 2, 3, 16, 16, 0.1, 0.9);
    AdamState opt;
    AdamConfig cfg;
    cfg.lr = 1e-3;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 200; ++step) {
        double loss = train_step(m, x, y, yref, opt, cfg);
        if (step == 0) first = loss;
        last = loss;
    }
    CHECK(last <= 0.5 * first);
}

TEST_CASE("deterministic training: identical seeds give bit-identical trajectories") {
    auto run = [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        SdanModel m = make_model<float>(tiny_config(29));
        Tensor x = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.0, 1.0);
        Tensor yref = oracle::rand_tensor<float>(rng, 2, 3, 8, 8, 0.0, 1.0);
        Tensor y = oracle::rand_tensor<float>(rng, 2, 3, 16, 16, 0.0, 1.0);
        AdamState opt;
        AdamConfig cfg;
        cfg.lr = 1e-4;
        std::vector<double> losses;
        for (int step = 0; step < 5; ++step) losses.push_back(train_step(m, x, y, yref, opt, cfg));
        std::vector<float> params;
        visit_params(m, [&](const std::string&, Tensor& p) {
            params.insert(params.end(), p.data.begin(), p.data.end());
        });
        return std::make_pair(losses, params);
    };
    set_deterministic(true);
    auto [l1, p1] = run(1234);
    auto [l2, p2] = run(1234);
    set_deterministic(false);
    CHECK(l1 == l2);
    CHECK(p1 == p2);
}

TEST_CASE("checkpoint round-trip preserves every parameter bit") {
    SdanModel m = make_model<float>(tiny_config(31));
    auto dir = std::filesystem::temp_directory_path() / "sdan_test_ckpt";
    save_checkpoint(dir.string(), m);
    SdanModel r = load_checkpoint(dir.string());
    CHECK(r.config.base_channels == m.config.base_channels);
    CHECK(r.config.scale == m.config.scale);
    std::vector<float> a, b;
    visit_params(m, [&](const std::string&, Tensor& p) {
        a.insert(a.end(), p.data.begin(), p.data.end());
    });
    visit_params(r, [&](const std::string&, Tensor& p) {
        b.insert(b.end(), p.data.begin(), p.data.end());
    });
    CHECK(a == b);
    std::filesystem::remove_all(dir);
}

TEST_CASE("loss is non-negative and zero only on masked agreement") {
    std::mt19937_64 rng(84);
    ForwardOutput out;
    out.aligned = oracle::rand_tensor<float>(rng, 1, 3, 4, 4);
    out.zoomed = oracle::rand_tensor<float>(rng, 1, 3, 8, 8);
    out.mask_lr = ValidityMask::ones(1, 4, 4);
    out.mask_lr.data.at(0, 0, 0, 0) = 0.f;
    out.mask_hr = upsample_mask(out.mask_lr, 2);
    Tensor y = oracle::rand_tensor<float>(rng, 1, 3, 8, 8);
    Tensor yref = oracle::rand_tensor<float>(rng, 1, 3, 4, 4);
    CHECK(masked_zoom_loss(out, y, yref) >= 0.0);

    // agreement on the valid set only: loss ignores the masked-out corner
    Tensor y_eq = out.zoomed;
    Tensor yref_eq = out.aligned;
    yref_eq.at(0, 0, 0, 0) += 42.f;  // hidden by the mask
    for (int c = 0; c < 3; ++c)
        for (int yy = 0; yy < 2; ++yy)
            for (int xx = 0; xx < 2; ++xx) y_eq.at(0, c, yy, xx) += 7.f;
    CHECK(masked_zoom_loss(out, y_eq, yref_eq) == doctest::Approx(0.0));
}
