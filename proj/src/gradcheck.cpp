#include "sdan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "sdan/attention.hpp"
#include "sdan/deform.hpp"
#include "sdan/model.hpp"
#include "sdan/ops.hpp"
#include "sdan/tensor.hpp"

namespace sdan {

namespace {

template <typename T>
struct Ctx {
    std::mt19937_64 rng;
    double eps_linear;  // safe for piecewise-linear dependence
    double eps_smooth;  // for sigmoid-bearing paths
    double floor_tiny;
    int max_entries;
    bool inject_fault = false;

    double uni(double lo, double hi) { return lo + (hi - lo) * Tensor::unit_real(rng); }
    int uni_int(int lo, int hi) {
        return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    TensorT<T> rand_tensor(int n, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
        TensorT<T> t(n, c, h, w);
        for (auto& v : t.data) v = static_cast<T>(uni(lo, hi));
        return t;
    }
};

template <typename T>
double probe_sum(const TensorT<T>& out, const TensorT<T>& g) {
    double acc = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i)
        acc += static_cast<double>(out.data[i]) * static_cast<double>(g.data[i]);
    return acc;
}

template <typename T>
struct FdTarget {
    std::vector<T>* values;
    std::vector<T> analytic;
    double eps;
};

// Central differences on a random subset of entries of each target,
// relative error floored by a fraction of the gradient tensor's own scale.
template <typename T>
double fd_compare(Ctx<T>& ctx, const std::function<double()>& loss,
                  std::vector<FdTarget<T>>& targets) {
    double worst = 0.0;
    for (auto& target : targets) {
        std::vector<T>& vals = *target.values;
        double gscale = 0.0;
        for (const T& a : target.analytic) gscale = std::max(gscale, std::abs(double(a)));
        const double floor = std::max(0.05 * gscale, ctx.floor_tiny);

        std::vector<size_t> idx(vals.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (static_cast<int>(idx.size()) > ctx.max_entries) {
            for (int i = 0; i < ctx.max_entries; ++i)
                std::swap(idx[i], idx[i + ctx.rng() % (idx.size() - i)]);
            idx.resize(ctx.max_entries);
        }

        for (size_t i : idx) {
            const double saved = vals[i];
            vals[i] = static_cast<T>(saved + target.eps);
            double up = loss();
            vals[i] = static_cast<T>(saved - target.eps);
            double down = loss();
            vals[i] = static_cast<T>(saved);
            double fd = (up - down) / (2.0 * target.eps);
            double a = target.analytic[i];
            double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// -------- per-op trials --------

template <typename T>
double trial_conv2d(Ctx<T>& ctx) {
    const int k = 1 + 2 * ctx.uni_int(0, 2);
    const int pad = ctx.uni_int(0, k / 2);
    const int stride = ctx.uni_int(1, 2);
    const int oh = ctx.uni_int(1, 4), ow = ctx.uni_int(1, 4);
    const int h = (oh - 1) * stride + k - 2 * pad;
    const int w = (ow - 1) * stride + k - 2 * pad;
    if (h < 1 || w < 1) return 0.0;
    const int n = ctx.uni_int(1, 2), cin = ctx.uni_int(1, 3), cout = ctx.uni_int(1, 3);

    TensorT<T> x = ctx.rand_tensor(n, cin, h, w);
    ConvParamsT<T> p;
    p.weight = ctx.rand_tensor(cout, cin, k, k);
    p.bias = ctx.rand_tensor(1, cout, 1, 1);
    p.stride = stride;
    p.pad = pad;
    TensorT<T> g = ctx.rand_tensor(n, cout, oh, ow);

    Conv2dGradsT<T> grads = conv2d_backward(x, p, g);
    auto loss = [&] { return probe_sum(conv2d(x, p), g); };
    std::vector<FdTarget<T>> targets;
    targets.push_back({&x.data, grads.input.data, ctx.eps_linear});
    targets.push_back({&p.weight.data, grads.weight.data, ctx.eps_linear});
    targets.push_back({&p.bias.data, grads.bias.data, ctx.eps_linear});
    return fd_compare(ctx, loss, targets);
}

template <typename T>
double trial_activation(Ctx<T>& ctx) {
    const int n = ctx.uni_int(1, 2), c = ctx.uni_int(1, 4);
    const int h = ctx.uni_int(2, 8), w = ctx.uni_int(2, 8);
    double worst = 0.0;
    for (Act kind : {Act::relu, Act::sigmoid}) {
        TensorT<T> x = ctx.rand_tensor(n, c, h, w);
        if (kind == Act::relu) {
            const double margin = std::max(1e-4, 10.0 * ctx.eps_linear);
            for (auto& v : x.data)
                while (std::abs(double(v)) < margin) v = static_cast<T>(ctx.uni(-1.0, 1.0));
        }
        TensorT<T> g = ctx.rand_tensor(n, c, h, w);
        TensorT<T> analytic = activation_backward(x, kind, g);
        auto loss = [&] { return probe_sum(activation(x, kind), g); };
        std::vector<FdTarget<T>> targets;
        targets.push_back(
            {&x.data, analytic.data, kind == Act::relu ? ctx.eps_linear : ctx.eps_smooth});
        worst = std::max(worst, fd_compare(ctx, loss, targets));
    }
    return worst;
}

template <typename T>
double trial_pool(Ctx<T>& ctx) {
    const int n = ctx.uni_int(1, 2), c = ctx.uni_int(1, 4);
    const int h = ctx.uni_int(1, 8), w = ctx.uni_int(1, 8);
    TensorT<T> x = ctx.rand_tensor(n, c, h, w);
    TensorT<T> g = ctx.rand_tensor(n, c, 1, 1);
    TensorT<T> analytic = global_avg_pool_backward(h, w, g);
    auto loss = [&] { return probe_sum(global_avg_pool(x), g); };
    std::vector<FdTarget<T>> targets;
    targets.push_back({&x.data, analytic.data, ctx.eps_linear});
    return fd_compare(ctx, loss, targets);
}

template <typename T>
double trial_concat(Ctx<T>& ctx) {
    const int n = ctx.uni_int(1, 2), h = ctx.uni_int(2, 6), w = ctx.uni_int(2, 6);
    const int ca = ctx.uni_int(1, 3), cb = ctx.uni_int(1, 3);
    TensorT<T> a = ctx.rand_tensor(n, ca, h, w);
    TensorT<T> b = ctx.rand_tensor(n, cb, h, w);
    TensorT<T> g = ctx.rand_tensor(n, ca + cb, h, w);
    auto [ga, gb] = concat_channels_backward(g, ca);
    auto loss = [&] { return probe_sum(concat_channels(a, b), g); };
    std::vector<FdTarget<T>> targets;
    targets.push_back({&a.data, ga.data, ctx.eps_linear});
    targets.push_back({&b.data, gb.data, ctx.eps_linear});
    return fd_compare(ctx, loss, targets);
}

template <typename T>
double trial_packing(Ctx<T>& ctx) {
    const int K = ctx.uni_int(1, 2) * 2;
    const int n = ctx.uni_int(1, 2), c = ctx.uni_int(1, 3);
    const int h = K * ctx.uni_int(1, 2), w = K * ctx.uni_int(1, 2);
    TensorT<T> x = ctx.rand_tensor(n, c, h, w);
    TensorT<T> g = ctx.rand_tensor(n, c * K * K, h / K, w / K);
    TensorT<T> analytic = depth_to_space(g, K);  // adjoint of the permutation
    auto loss = [&] { return probe_sum(space_to_depth(x, K), g); };
    std::vector<FdTarget<T>> targets;
    targets.push_back({&x.data, analytic.data, ctx.eps_linear});
    return fd_compare(ctx, loss, targets);
}

template <typename T>
double relu_kink_margin(const TensorT<T>& pre) {
    double m = 1e30;
    for (const T& v : pre.data) m = std::min(m, std::abs(double(v)));
    return m;
}

template <typename T>
double trial_channel_attention(Ctx<T>& ctx) {
    const int c = 4 * ctx.uni_int(1, 4);
    const int n = ctx.uni_int(1, 2), h = ctx.uni_int(2, 5), w = ctx.uni_int(2, 5);
    for (int attempt = 0; attempt < 64; ++attempt) {
        TensorT<T> x = ctx.rand_tensor(n, c, h, w);
        AttentionParamsT<T> p = make_attention<T>(c, clamp_reduction(c), ctx.rng());
        for (auto& v : p.fc1.data) v = static_cast<T>(ctx.uni(-0.6, 0.6));
        for (auto& v : p.fc2.data) v = static_cast<T>(ctx.uni(-0.6, 0.6));
        CaTapeT<T> tape;
        TensorT<T> out = channel_attention(x, p, &tape);
        if (relu_kink_margin(tape.hidden_pre) < std::max(1e-3, 20.0 * ctx.eps_smooth)) continue;
        TensorT<T> g = ctx.rand_tensor(n, c, h, w);
        p.fc1.alloc_grad();
        p.fc2.alloc_grad();
        TensorT<T> gx = channel_attention_backward(p, tape, g);
        auto loss = [&] { return probe_sum(channel_attention(x, p), g); };
        std::vector<FdTarget<T>> targets;
        targets.push_back({&x.data, gx.data, ctx.eps_smooth});
        targets.push_back({&p.fc1.data, p.fc1.grad, ctx.eps_smooth});
        targets.push_back({&p.fc2.data, p.fc2.grad, ctx.eps_smooth});
        return fd_compare(ctx, loss, targets);
    }
    throw Error("channel_attention gradcheck: could not sample away from the relu kink");
}

template <typename T>
double trial_cpa(Ctx<T>& ctx) {
    const int K = 2 * ctx.uni_int(1, 2);
    const int c = ctx.uni_int(1, 2);
    const int n = 1, h = 8, w = 8;
    for (int attempt = 0; attempt < 64; ++attempt) {
        TensorT<T> x = ctx.rand_tensor(n, c, h, w);
        CpaParamsT<T> p;
        p.K = K;
        const int packed = c * K * K;
        p.inner = make_attention<T>(packed, clamp_reduction(packed), ctx.rng());
        CaTapeT<T> tape;
        TensorT<T> out = cross_packing_attention(x, p, &tape);
        if (relu_kink_margin(tape.hidden_pre) < std::max(1e-3, 20.0 * ctx.eps_smooth)) continue;
        TensorT<T> g = ctx.rand_tensor(n, c, h, w);
        p.inner.fc1.alloc_grad();
        p.inner.fc2.alloc_grad();
        TensorT<T> gx = cross_packing_attention_backward(p, tape, g);
        auto loss = [&] { return probe_sum(cross_packing_attention(x, p), g); };
        std::vector<FdTarget<T>> targets;
        targets.push_back({&x.data, gx.data, ctx.eps_smooth});
        targets.push_back({&p.inner.fc1.data, p.inner.fc1.grad, ctx.eps_smooth});
        targets.push_back({&p.inner.fc2.data, p.inner.fc2.grad, ctx.eps_smooth});
        return fd_compare(ctx, loss, targets);
    }
    throw Error("cpa gradcheck: could not sample away from the relu kink");
}

template <typename T>
double trial_flip_reference(Ctx<T>& ctx) {
    const int cin = ctx.uni_int(1, 3), cout = ctx.uni_int(1, 3);
    const int n = 1, h = ctx.uni_int(4, 6), w = ctx.uni_int(4, 6);
    const double margin = std::max(1e-3, 10.0 * ctx.eps_linear);
    for (int attempt = 0; attempt < 64; ++attempt) {
        TensorT<T> yref = ctx.rand_tensor(n, cin, h, w);
        ConvParamsT<T> feat = make_conv<T>(cout, cin, 3, 1, ctx.rng());
        for (auto& v : feat.weight.data) v = static_cast<T>(ctx.uni(-0.5, 0.5));
        for (auto& v : feat.bias.data) v = static_cast<T>(ctx.uni(-0.2, 0.2));
        FlipRefTapeT<T> tape;
        TensorT<T> out = flip_augmented_reference(yref, feat, &tape);
        double kink = 1e30;
        for (const auto& pre : tape.conv_pre) kink = std::min(kink, relu_kink_margin(pre));
        if (kink < margin) continue;
        TensorT<T> g = ctx.rand_tensor(n, cout, h, w);
        feat.weight.alloc_grad();
        feat.bias.alloc_grad();
        TensorT<T> gy = flip_augmented_reference_backward(feat, tape, g);
        auto loss = [&] { return probe_sum(flip_augmented_reference(yref, feat), g); };
        std::vector<FdTarget<T>> targets;
        targets.push_back({&yref.data, gy.data, ctx.eps_linear});
        targets.push_back({&feat.weight.data, feat.weight.grad, ctx.eps_linear});
        targets.push_back({&feat.bias.data, feat.bias.grad, ctx.eps_linear});
        return fd_compare(ctx, loss, targets);
    }
    throw Error("flip_reference gradcheck: could not sample away from the relu kink");
}

template <typename T>
double trial_offset_head(Ctx<T>& ctx) {
    const int C = 4, n = 1, h = 8, w = 8;
    const OffsetMode mode = ctx.uni_int(0, 1) ? OffsetMode::squared : OffsetMode::per_point;
    for (int attempt = 0; attempt < 64; ++attempt) {
        TensorT<T> fx = ctx.rand_tensor(n, C, h, w, 0.0, 1.0);
        TensorT<T> fy = ctx.rand_tensor(n, C, h, w, 0.0, 1.0);
        OffsetHeadT<T> head = make_offset_head<T>(C, AttentionKind::cpa, mode, 2, 3, ctx.rng());
        // The production head is zero-initialized; re-randomize so gradients
        // actually flow to the attention weights and inputs.
        for (auto& v : head.conv2.weight.data) v = static_cast<T>(ctx.uni(-0.3, 0.3));
        OffsetHeadTapeT<T> tape;
        OffsetFieldT<T> theta = offset_head_forward(fx, fy, head, &tape);
        const double margin = std::max(1e-3, 20.0 * ctx.eps_smooth);
        if (std::min(relu_kink_margin(tape.h1_pre), relu_kink_margin(tape.att.hidden_pre)) <
            margin)
            continue;
        TensorT<T> g = ctx.rand_tensor(theta.data.n, theta.data.c, h, w);
        head.cpa.inner.fc1.alloc_grad();
        head.cpa.inner.fc2.alloc_grad();
        head.conv1.weight.alloc_grad();
        head.conv1.bias.alloc_grad();
        head.conv2.weight.alloc_grad();
        head.conv2.bias.alloc_grad();
        auto [gfx, gfy] = offset_head_backward(head, tape, g);
        auto loss = [&] { return probe_sum(offset_head_forward(fx, fy, head).data, g); };
        std::vector<FdTarget<T>> targets;
        targets.push_back({&fx.data, gfx.data, ctx.eps_smooth});
        targets.push_back({&fy.data, gfy.data, ctx.eps_smooth});
        targets.push_back({&head.cpa.inner.fc1.data, head.cpa.inner.fc1.grad, ctx.eps_smooth});
        targets.push_back({&head.cpa.inner.fc2.data, head.cpa.inner.fc2.grad, ctx.eps_smooth});
        targets.push_back({&head.conv1.weight.data, head.conv1.weight.grad, ctx.eps_smooth});
        targets.push_back({&head.conv2.weight.data, head.conv2.weight.grad, ctx.eps_smooth});
        return fd_compare(ctx, loss, targets);
    }
    throw Error("offset_head gradcheck: could not sample away from the relu kink");
}

template <typename T>
double trial_deform(Ctx<T>& ctx, OffsetMode mode) {
    const int k = 3;
    const int n = ctx.uni_int(1, 2), cin = ctx.uni_int(1, 3), cout = ctx.uni_int(1, 3);
    const int h = ctx.uni_int(5, 8), w = ctx.uni_int(5, 8);
    TensorT<T> feature = ctx.rand_tensor(n, cin, h, w);
    ConvParamsT<T> p;
    p.weight = ctx.rand_tensor(cout, cin, k, k);
    p.bias = ctx.rand_tensor(1, cout, 1, 1);
    p.pad = k / 2;

    // Fractional parts pinned to [0.3, 0.7]: every sampling coordinate stays
    // clear of the bilinear kinks at integers by at least 0.3.
    OffsetFieldT<T> off = OffsetFieldT<T>::zeros(mode, n, h, w, k);
    for (auto& v : off.data.data)
        v = static_cast<T>(ctx.uni_int(-2, 1) + ctx.uni(0.3, 0.7));

    TensorT<T> g = ctx.rand_tensor(n, cout, h, w);
    DeformConvGradsT<T> grads = deform_conv_backward(feature, off, p, g);
    if (ctx.inject_fault) grads.weight.data[0] += T(0.5);
    auto loss = [&] { return probe_sum(deform_conv_forward(feature, off, p), g); };
    std::vector<FdTarget<T>> targets;
    targets.push_back({&feature.data, grads.feature.data, ctx.eps_linear});
    targets.push_back({&off.data.data, grads.offsets.data, ctx.eps_linear});
    targets.push_back({&p.weight.data, grads.weight.data, ctx.eps_linear});
    targets.push_back({&p.bias.data, grads.bias.data, ctx.eps_linear});
    return fd_compare(ctx, loss, targets);
}

template <typename T>
double trial_masked_loss(Ctx<T>& ctx) {
    const int n = 1, c = ctx.uni_int(1, 3), h = ctx.uni_int(3, 6), w = ctx.uni_int(3, 6);
    const int f = 2;
    ForwardOutputT<T> out;
    out.aligned = ctx.rand_tensor(n, c, h, w);
    out.zoomed = ctx.rand_tensor(n, 3, f * h, f * w);
    TensorT<T> yref = ctx.rand_tensor(n, c, h, w);
    TensorT<T> y = ctx.rand_tensor(n, 3, f * h, f * w);
    // |pred - target| bounded away from 0 so the sign subgradient is stable
    // under the probe step.
    auto separate = [&](TensorT<T>& pred, const TensorT<T>& target) {
        for (size_t i = 0; i < pred.data.size(); ++i) {
            double d = double(pred.data[i]) - double(target.data[i]);
            if (std::abs(d) < 0.05)
                pred.data[i] = static_cast<T>(target.data[i] + (d >= 0 ? 0.05 : -0.05) +
                                              ctx.uni(0.0, 0.2) * (d >= 0 ? 1 : -1));
        }
    };
    separate(out.aligned, yref);
    separate(out.zoomed, y);
    out.mask_lr.data = TensorT<T>::zeros(n, 1, h, w);
    for (auto& v : out.mask_lr.data.data) v = ctx.uni(0.0, 1.0) < 0.7 ? T(1) : T(0);
    out.mask_lr.data.data[0] = T(1);  // at least one valid element
    out.mask_hr = upsample_mask(out.mask_lr, f);

    auto [gz, ga] = masked_zoom_loss_backward(out, y, yref);
    auto loss = [&] { return masked_zoom_loss(out, y, yref); };
    std::vector<FdTarget<T>> targets;
    targets.push_back({&out.zoomed.data, gz.data, ctx.eps_linear});
    targets.push_back({&out.aligned.data, ga.data, ctx.eps_linear});
    return fd_compare(ctx, loss, targets);
}

// Full-model check. Always 64-bit arithmetic; a float32 central difference
// through ~10^4 relu units cannot stay clear of kink crossings.
double trial_full_model(Ctx<double>& ctx) {
    ModelConfig cfg;
    cfg.in_channels = 3;
    cfg.base_channels = 8;
    cfg.num_res_blocks = 1;
    cfg.scale = 2;
    cfg.offset_mode = OffsetMode::squared;
    cfg.attention = AttentionKind::cpa;
    cfg.flip_aug = true;
    cfg.pack_k = 2;

    const int h = 8, w = 8, n = 1;
    const double eps = 1e-6;
    for (int attempt = 0; attempt < 64; ++attempt) {
        cfg.seed = ctx.rng();
        SdanModelT<double> model = make_model<double>(cfg);
        // Dither the offset head so the sampling lattice sits between
        // integers and away from the mask boundaries.
        model.head.conv2.bias.data = {0.37, -0.23};
        for (auto& v : model.head.conv2.weight.data) v = ctx.uni(-0.01, 0.01);

        TensorT<double> x = ctx.rand_tensor(n, 3, h, w, 0.05, 0.95);
        TensorT<double> yref = ctx.rand_tensor(n, 3, h, w, 0.05, 0.95);
        TensorT<double> y = ctx.rand_tensor(n, 3, cfg.scale * h, cfg.scale * w, 0.05, 0.95);

        ModelTapeT<double> tape;
        ForwardOutputT<double> out = forward(model, x, yref, &tape);

        // Reject samples that sit near any non-smooth point.
        double kink = std::min({relu_kink_margin(tape.fx_pre), relu_kink_margin(tape.head.h1_pre),
                                relu_kink_margin(tape.head.att.hidden_pre)});
        for (const auto& pre : tape.flip_ref.conv_pre)
            kink = std::min(kink, relu_kink_margin(pre));
        for (const auto& pre : tape.block_mid_pre) kink = std::min(kink, relu_kink_margin(pre));
        for (const auto& pre : tape.up_shuffled) kink = std::min(kink, relu_kink_margin(pre));
        if (kink < 1e-4) continue;

        bool coords_ok = true;
        for (int yy = 0; yy < h && coords_ok; ++yy)
            for (int xx = 0; xx < w && coords_ok; ++xx) {
                double dy = out.offsets.data.at(0, 0, yy, xx);
                double dx = out.offsets.data.at(0, 1, yy, xx);
                auto frac_margin = [](double v) {
                    double fpart = v - std::floor(v);
                    return std::min(fpart, 1.0 - fpart);
                };
                if (frac_margin(dy) < 0.15 || frac_margin(dx) < 0.15) coords_ok = false;
                double cy = yy + dy, cx = xx + dx;
                if (std::min({std::abs(cy), std::abs(cy - h), std::abs(cx), std::abs(cx - w)}) <
                    0.05)
                    coords_ok = false;
            }
        if (!coords_ok) continue;

        auto residual_margin = [](const TensorT<double>& a, const TensorT<double>& b,
                                  const TensorT<double>& mask, int upf) {
            double m = 1e30;
            for (int ch = 0; ch < a.c; ++ch)
                for (int yy = 0; yy < a.h; ++yy)
                    for (int xx = 0; xx < a.w; ++xx)
                        if (mask.at(0, 0, yy / upf, xx / upf) != 0.0)
                            m = std::min(m, std::abs(a.at(0, ch, yy, xx) - b.at(0, ch, yy, xx)));
            return m;
        };
        if (residual_margin(out.aligned, yref, out.mask_lr.data, 1) < 1e-4) continue;
        if (residual_margin(out.zoomed, y, out.mask_lr.data, cfg.scale) < 1e-4) continue;

        zero_grads(model);
        auto [gz, ga] = masked_zoom_loss_backward(out, y, yref);
        backward(model, tape, out, gz, ga);

        auto loss = [&] {
            ForwardOutputT<double> o = forward(model, x, yref);
            return masked_zoom_loss(o, y, yref);
        };
        std::vector<FdTarget<double>> targets;
        visit_params(model, [&](const std::string&, TensorT<double>& p) {
            targets.push_back({&p.data, p.grad, eps});
        });
        // A handful of probes per parameter keeps the 100-trial budget sane.
        int saved = ctx.max_entries;
        ctx.max_entries = 3;
        double err = fd_compare(ctx, loss, targets);
        ctx.max_entries = saved;
        return err;
    }
    throw Error("full_model gradcheck: could not sample a kink-free configuration");
}

template <typename T>
Ctx<T> make_ctx(const GradcheckOptions& opts, std::uint64_t salt) {
    Ctx<T> ctx;
    ctx.rng.seed(derive_seed(opts.seed, salt));
    if constexpr (std::is_same_v<T, double>) {
        ctx.eps_linear = 1e-3;
        ctx.eps_smooth = 1e-4;
        ctx.floor_tiny = 1e-9;
    } else {
        ctx.eps_linear = 1e-2;
        ctx.eps_smooth = 1e-2;
        ctx.floor_tiny = 1e-5;
    }
    ctx.max_entries = opts.max_entries;
    ctx.inject_fault = opts.inject_fault;
    return ctx;
}

template <typename T>
GradcheckResult run_op(const GradcheckOptions& opts, const std::string& name,
                       std::uint64_t salt, double tol,
                       const std::function<double(Ctx<T>&)>& trial) {
    Ctx<T> ctx = make_ctx<T>(opts, salt);
    GradcheckResult r;
    r.op = name;
    r.tol = tol;
    for (int i = 0; i < opts.trials; ++i) r.max_rel_err = std::max(r.max_rel_err, trial(ctx));
    r.pass = r.max_rel_err <= tol;
    return r;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts) {
    const double tol = opts.f64 ? 1e-6 : 1e-4;
    std::vector<GradcheckResult> results;
    std::vector<std::string> known;

    auto want = [&](const std::string& name) {
        known.push_back(name);
        return opts.op_filter.empty() || opts.op_filter == name;
    };

    auto add = [&]<typename Fn>(const std::string& name, std::uint64_t salt, Fn&& fn) {
        if (!want(name)) return;
        if (opts.f64)
            results.push_back(run_op<double>(opts, name, salt, tol,
                                             std::function<double(Ctx<double>&)>(fn)));
        else
            results.push_back(
                run_op<float>(opts, name, salt, tol, std::function<double(Ctx<float>&)>(fn)));
    };

    add("conv2d", 1, [](auto& ctx) { return trial_conv2d(ctx); });
    add("activation", 2, [](auto& ctx) { return trial_activation(ctx); });
    add("global_avg_pool", 3, [](auto& ctx) { return trial_pool(ctx); });
    add("concat", 4, [](auto& ctx) { return trial_concat(ctx); });
    add("packing", 5, [](auto& ctx) { return trial_packing(ctx); });
    add("channel_attention", 6, [](auto& ctx) { return trial_channel_attention(ctx); });
    add("cpa", 7, [](auto& ctx) { return trial_cpa(ctx); });
    add("flip_reference", 8, [](auto& ctx) { return trial_flip_reference(ctx); });
    add("offset_head", 9, [](auto& ctx) { return trial_offset_head(ctx); });
    add("deform_conv_squared", 10,
        [](auto& ctx) { return trial_deform(ctx, OffsetMode::squared); });
    add("deform_conv_per_point", 11,
        [](auto& ctx) { return trial_deform(ctx, OffsetMode::per_point); });
    add("masked_loss", 12, [](auto& ctx) { return trial_masked_loss(ctx); });

    if (want("full_model")) {
        Ctx<double> ctx = make_ctx<double>(opts, 13);
        GradcheckResult r;
        r.op = "full_model";
        r.tol = tol;
        for (int i = 0; i < opts.trials; ++i)
            r.max_rel_err = std::max(r.max_rel_err, trial_full_model(ctx));
        r.pass = r.max_rel_err <= tol;
        results.push_back(r);
    }

    if (results.empty()) {
        std::string names;
        for (const auto& n : known) names += n + " ";
        throw ConfigError("gradcheck: unknown op '" + opts.op_filter + "'; known ops: " + names);
    }
    return results;
}

}  // namespace sdan
