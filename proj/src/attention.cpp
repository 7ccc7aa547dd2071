#include "sdan/attention.hpp"

namespace sdan {

int clamp_reduction(int c, int wanted) {
    int r = std::min(wanted, std::max(1, c / 4));
    while (r > 1 && c % r != 0) --r;
    return r;
}

namespace {

// y[s][o] = sum_i w[o][i] * x[s][i] on (n, c, 1, 1) tensors.
template <typename T>
TensorT<T> fc_forward(const TensorT<T>& x, const TensorT<T>& w) {
    TensorT<T> y(x.n, w.n, 1, 1);
    for (int s = 0; s < x.n; ++s)
        for (int o = 0; o < w.n; ++o) {
            T acc = T(0);
            for (int i = 0; i < w.c; ++i) acc += w.at(o, i, 0, 0) * x.at(s, i, 0, 0);
            y.at(s, o, 0, 0) = acc;
        }
    return y;
}

template <typename T>
TensorT<T> fc_backward(const TensorT<T>& x, TensorT<T>& w, const TensorT<T>& grad_y) {
    w.alloc_grad();
    TensorT<T> gx(x.n, w.c, 1, 1);
    for (int s = 0; s < x.n; ++s)
        for (int o = 0; o < w.n; ++o) {
            T gy = grad_y.at(s, o, 0, 0);
            for (int i = 0; i < w.c; ++i) {
                gx.at(s, i, 0, 0) += w.at(o, i, 0, 0) * gy;
                w.grad_at(o, i, 0, 0) += gy * x.at(s, i, 0, 0);
            }
        }
    return gx;
}

}  // namespace

template <typename T>
TensorT<T> channel_attention(const TensorT<T>& input, const AttentionParamsT<T>& p,
                             CaTapeT<T>* tape) {
    p.validate();
    if (input.c != p.channels())
        throw ConfigError("channel_attention: input channels " + std::to_string(input.c) +
                          " != attention channels " + std::to_string(p.channels()));
    CaTapeT<T> local;
    CaTapeT<T>& t = tape ? *tape : local;
    t.input = input;
    t.pooled = global_avg_pool(input);
    t.hidden_pre = fc_forward(t.pooled, p.fc1);
    t.hidden = activation(t.hidden_pre, Act::relu);
    t.gate_pre = fc_forward(t.hidden, p.fc2);
    t.gate = activation(t.gate_pre, Act::sigmoid);

    TensorT<T> out(input.n, input.c, input.h, input.w);
    for (int s = 0; s < input.n; ++s)
        for (int ch = 0; ch < input.c; ++ch) {
            T g = t.gate.at(s, ch, 0, 0);
            const T* src = input.plane(s, ch);
            T* dst = out.plane(s, ch);
            for (int i = 0; i < input.h * input.w; ++i) dst[i] = src[i] * g;
        }
    return out;
}

template <typename T>
TensorT<T> channel_attention_backward(AttentionParamsT<T>& p, const CaTapeT<T>& tape,
                                      const TensorT<T>& grad_out) {
    const TensorT<T>& input = tape.input;
    if (!grad_out.same_shape(input)) throw DimError("channel_attention_backward: shape mismatch");

    // Scale branch.
    TensorT<T> grad_input(input.n, input.c, input.h, input.w);
    TensorT<T> grad_gate(input.n, input.c, 1, 1);
    for (int s = 0; s < input.n; ++s)
        for (int ch = 0; ch < input.c; ++ch) {
            T g = tape.gate.at(s, ch, 0, 0);
            const T* go = grad_out.plane(s, ch);
            const T* src = input.plane(s, ch);
            T* dst = grad_input.plane(s, ch);
            T acc = T(0);
            for (int i = 0; i < input.h * input.w; ++i) {
                dst[i] = go[i] * g;
                acc += go[i] * src[i];
            }
            grad_gate.at(s, ch, 0, 0) = acc;
        }

    // Gate branch, chained back to the pooled squeeze.
    TensorT<T> grad_gate_pre = activation_backward(tape.gate_pre, Act::sigmoid, grad_gate);
    TensorT<T> grad_hidden = fc_backward(tape.hidden, p.fc2, grad_gate_pre);
    TensorT<T> grad_hidden_pre = activation_backward(tape.hidden_pre, Act::relu, grad_hidden);
    TensorT<T> grad_pooled = fc_backward(tape.pooled, p.fc1, grad_hidden_pre);
    TensorT<T> pool_back = global_avg_pool_backward(input.h, input.w, grad_pooled);
    add_scaled(grad_input, pool_back, T(1));
    return grad_input;
}

template <typename T>
TensorT<T> cross_packing_attention(const TensorT<T>& input, const CpaParamsT<T>& p,
                                   CaTapeT<T>* tape) {
    if (p.K <= 0) throw ConfigError("cross_packing_attention: K must be positive");
    if (input.h % p.K != 0 || input.w % p.K != 0)
        throw ConfigError("cross_packing_attention: spatial dims not divisible by K=" +
                          std::to_string(p.K));
    TensorT<T> packed = space_to_depth(input, p.K);
    TensorT<T> attended = channel_attention(packed, p.inner, tape);
    return depth_to_space(attended, p.K);
}

template <typename T>
TensorT<T> cross_packing_attention_backward(CpaParamsT<T>& p, const CaTapeT<T>& tape,
                                            const TensorT<T>& grad_out) {
    TensorT<T> packed_grad = space_to_depth(grad_out, p.K);
    TensorT<T> grad_packed_in = channel_attention_backward(p.inner, tape, packed_grad);
    return depth_to_space(grad_packed_in, p.K);
}

static constexpr unsigned kFlipGroup[4] = {FlipNone, FlipH, FlipV, FlipHV};

template <typename T>
TensorT<T> flip_augmented_reference(const TensorT<T>& yref, const ConvParamsT<T>& feat,
                                    FlipRefTapeT<T>* tape) {
    FlipRefTapeT<T> local;
    FlipRefTapeT<T>& t = tape ? *tape : local;
    TensorT<T> mean;
    for (int b = 0; b < 4; ++b) {
        t.flipped_in[b] = flip(yref, kFlipGroup[b]);
        t.conv_pre[b] = conv2d(t.flipped_in[b], feat);
        TensorT<T> branch = flip(activation(t.conv_pre[b], Act::relu), kFlipGroup[b]);
        if (b == 0)
            mean = std::move(branch);
        else
            add_scaled(mean, branch, T(1));
    }
    for (auto& v : mean.data) v *= T(0.25);
    return mean;
}

template <typename T>
TensorT<T> flip_augmented_reference_backward(ConvParamsT<T>& feat, const FlipRefTapeT<T>& tape,
                                             const TensorT<T>& grad_out) {
    TensorT<T> grad_yref;
    for (int b = 0; b < 4; ++b) {
        TensorT<T> g = grad_out;
        for (auto& v : g.data) v *= T(0.25);
        g = flip(g, kFlipGroup[b]);  // un-flip adjoint
        g = activation_backward(tape.conv_pre[b], Act::relu, g);
        Conv2dGradsT<T> cg = conv2d_backward(tape.flipped_in[b], feat, g);
        accumulate_grad(feat.weight, cg.weight);
        accumulate_grad(feat.bias, cg.bias);
        TensorT<T> gin = flip(cg.input, kFlipGroup[b]);
        if (b == 0)
            grad_yref = std::move(gin);
        else
            add_scaled(grad_yref, gin, T(1));
    }
    return grad_yref;
}

template <typename T>
OffsetHeadT<T> make_offset_head(int feat_channels, AttentionKind attention, OffsetMode mode,
                                int pack_k, int deform_k, std::uint64_t seed) {
    OffsetHeadT<T> head;
    head.attention = attention;
    head.mode = mode;
    head.k = deform_k;
    const int c2 = 2 * feat_channels;
    if (attention == AttentionKind::cpa) {
        head.cpa.K = pack_k;
        int packed_c = c2 * pack_k * pack_k;
        head.cpa.inner =
            make_attention<T>(packed_c, clamp_reduction(packed_c), derive_seed(seed, 10));
    } else if (attention == AttentionKind::channel) {
        head.ca = make_attention<T>(c2, clamp_reduction(c2), derive_seed(seed, 11));
    }
    head.conv1 = make_conv<T>(feat_channels, c2, 3, 1, derive_seed(seed, 12));
    const int out_c = mode == OffsetMode::squared ? 2 : 2 * deform_k * deform_k;
    head.conv2 = make_conv<T>(out_c, feat_channels, 3, 1, derive_seed(seed, 13));
    // Zero init keeps Theta identically zero at step 0.
    std::fill(head.conv2.weight.data.begin(), head.conv2.weight.data.end(), T(0));
    return head;
}

template <typename T>
OffsetFieldT<T> offset_head_forward(const TensorT<T>& fx, const TensorT<T>& fy,
                                    const OffsetHeadT<T>& head, OffsetHeadTapeT<T>* tape) {
    if (!fx.same_shape(fy))
        throw DimError("offset_head: feature shapes differ, " + fx.shape_str() + " vs " +
                       fy.shape_str());
    OffsetHeadTapeT<T> local;
    OffsetHeadTapeT<T>& t = tape ? *tape : local;
    t.concat = concat_channels(fx, fy);
    switch (head.attention) {
        case AttentionKind::cpa:
            t.att_out = cross_packing_attention(t.concat, head.cpa, &t.att);
            break;
        case AttentionKind::channel:
            t.att_out = channel_attention(t.concat, head.ca, &t.att);
            break;
        case AttentionKind::none:
            t.att_out = t.concat;
            break;
    }
    t.h1_pre = conv2d(t.att_out, head.conv1);
    t.h1 = activation(t.h1_pre, Act::relu);
    OffsetFieldT<T> theta;
    theta.mode = head.mode;
    theta.data = conv2d(t.h1, head.conv2);
    return theta;
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> offset_head_backward(OffsetHeadT<T>& head,
                                                       const OffsetHeadTapeT<T>& tape,
                                                       const TensorT<T>& grad_theta) {
    Conv2dGradsT<T> g2 = conv2d_backward(tape.h1, head.conv2, grad_theta);
    accumulate_grad(head.conv2.weight, g2.weight);
    accumulate_grad(head.conv2.bias, g2.bias);
    TensorT<T> gh1 = activation_backward(tape.h1_pre, Act::relu, g2.input);
    Conv2dGradsT<T> g1 = conv2d_backward(tape.att_out, head.conv1, gh1);
    accumulate_grad(head.conv1.weight, g1.weight);
    accumulate_grad(head.conv1.bias, g1.bias);

    TensorT<T> grad_concat;
    switch (head.attention) {
        case AttentionKind::cpa:
            grad_concat = cross_packing_attention_backward(head.cpa, tape.att, g1.input);
            break;
        case AttentionKind::channel:
            grad_concat = channel_attention_backward(head.ca, tape.att, g1.input);
            break;
        case AttentionKind::none:
            grad_concat = std::move(g1.input);
            break;
    }
    auto [gfx, gfy] = concat_channels_backward(grad_concat, grad_concat.c / 2);
    return {std::move(gfx), std::move(gfy)};
}

#define SDAN_INSTANTIATE_ATTENTION(T)                                                          \
    template TensorT<T> channel_attention<T>(const TensorT<T>&, const AttentionParamsT<T>&,    \
                                             CaTapeT<T>*);                                     \
    template TensorT<T> channel_attention_backward<T>(AttentionParamsT<T>&, const CaTapeT<T>&, \
                                                      const TensorT<T>&);                      \
    template TensorT<T> cross_packing_attention<T>(const TensorT<T>&, const CpaParamsT<T>&,    \
                                                   CaTapeT<T>*);                               \
    template TensorT<T> cross_packing_attention_backward<T>(CpaParamsT<T>&, const CaTapeT<T>&, \
                                                            const TensorT<T>&);                \
    template TensorT<T> flip_augmented_reference<T>(const TensorT<T>&, const ConvParamsT<T>&,  \
                                                    FlipRefTapeT<T>*);                         \
    template TensorT<T> flip_augmented_reference_backward<T>(                                  \
        ConvParamsT<T>&, const FlipRefTapeT<T>&, const TensorT<T>&);                           \
    template OffsetHeadT<T> make_offset_head<T>(int, AttentionKind, OffsetMode, int, int,      \
                                                std::uint64_t);                                \
    template OffsetFieldT<T> offset_head_forward<T>(const TensorT<T>&, const TensorT<T>&,      \
                                                    const OffsetHeadT<T>&,                     \
                                                    OffsetHeadTapeT<T>*);                      \
    template std::pair<TensorT<T>, TensorT<T>> offset_head_backward<T>(                        \
        OffsetHeadT<T>&, const OffsetHeadTapeT<T>&, const TensorT<T>&);

SDAN_INSTANTIATE_ATTENTION(float)
SDAN_INSTANTIATE_ATTENTION(double)

}  // namespace sdan
