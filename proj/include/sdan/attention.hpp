#pragma once

#include <array>

#include "sdan/deform.hpp"
#include "sdan/ops.hpp"
#include "sdan/tensor.hpp"

namespace sdan {

// Squeeze-and-excitation style gate: sigmoid(fc2(relu(fc1(pool(F))))).
// Both fc layers are bias-free.
template <typename T>
struct AttentionParamsT {
    int reduction = 16;
    TensorT<T> fc1;  // (c/r, c, 1, 1)
    TensorT<T> fc2;  // (c, c/r, 1, 1)

    int channels() const { return fc2.n; }

    void validate() const {
        if (fc1.n != fc2.c || fc1.c != fc2.n)
            throw ConfigError("attention fc shapes are inconsistent");
        if (reduction <= 0 || fc2.n % reduction != 0)
            throw ConfigError("attention channels must be divisible by reduction");
    }
};
using AttentionParams = AttentionParamsT<float>;

// Largest reduction <= wanted that divides c and keeps c/r >= 4.
int clamp_reduction(int c, int wanted = 16);

template <typename T>
AttentionParamsT<T> make_attention(int c, int reduction, std::uint64_t seed) {
    AttentionParamsT<T> p;
    p.reduction = reduction;
    int hidden = c / reduction;
    T b1 = T(1) / std::sqrt(static_cast<T>(c));
    T b2 = T(1) / std::sqrt(static_cast<T>(hidden));
    p.fc1 = TensorT<T>::uniform(hidden, c, 1, 1, -b1, b1, derive_seed(seed, 0));
    p.fc2 = TensorT<T>::uniform(c, hidden, 1, 1, -b2, b2, derive_seed(seed, 1));
    return p;
}

template <typename T>
struct CpaParamsT {
    int K = 4;
    AttentionParamsT<T> inner;  // sized for c_in * K^2 channels
};
using CpaParams = CpaParamsT<float>;

template <typename T>
struct CaTapeT {
    TensorT<T> input;  // what the attention block saw (packed, for CPA)
    TensorT<T> pooled;
    TensorT<T> hidden_pre;
    TensorT<T> hidden;
    TensorT<T> gate_pre;
    TensorT<T> gate;
};

template <typename T>
TensorT<T> channel_attention(const TensorT<T>& input, const AttentionParamsT<T>& p,
                             CaTapeT<T>* tape = nullptr);

// Accumulates fc gradients into p.fc{1,2}.grad and returns the input gradient.
template <typename T>
TensorT<T> channel_attention_backward(AttentionParamsT<T>& p, const CaTapeT<T>& tape,
                                      const TensorT<T>& grad_out);

// depth_to_space(channel_attention(space_to_depth(F, K)), K)
template <typename T>
TensorT<T> cross_packing_attention(const TensorT<T>& input, const CpaParamsT<T>& p,
                                   CaTapeT<T>* tape = nullptr);

template <typename T>
TensorT<T> cross_packing_attention_backward(CpaParamsT<T>& p, const CaTapeT<T>& tape,
                                            const TensorT<T>& grad_out);

template <typename T>
struct FlipRefTapeT {
    std::array<TensorT<T>, 4> flipped_in;
    std::array<TensorT<T>, 4> conv_pre;
};

// Reference feature under the flip group {id, h, v, hv}: flip, shared conv +
// relu, un-flip, average the four branches.
template <typename T>
TensorT<T> flip_augmented_reference(const TensorT<T>& yref, const ConvParamsT<T>& feat,
                                    FlipRefTapeT<T>* tape = nullptr);

// Accumulates into feat.weight.grad / feat.bias.grad; returns the yref gradient.
template <typename T>
TensorT<T> flip_augmented_reference_backward(ConvParamsT<T>& feat, const FlipRefTapeT<T>& tape,
                                             const TensorT<T>& grad_out);

enum class AttentionKind { none, channel, cpa };

// Offset learning head: configured attention over concat(Fx, Fy), then a
// 3x3 conv pair ending in 2 (squared) or 2k^2 (per_point) channels. The
// final conv is zero-initialized so a fresh head emits exactly zero offsets.
template <typename T>
struct OffsetHeadT {
    AttentionKind attention = AttentionKind::cpa;
    OffsetMode mode = OffsetMode::squared;
    int k = 3;  // kernel size of the deformable layer fed by this head
    CpaParamsT<T> cpa;
    AttentionParamsT<T> ca;
    ConvParamsT<T> conv1;
    ConvParamsT<T> conv2;
};
using OffsetHead = OffsetHeadT<float>;

template <typename T>
OffsetHeadT<T> make_offset_head(int feat_channels, AttentionKind attention, OffsetMode mode,
                                int pack_k, int deform_k, std::uint64_t seed);

template <typename T>
struct OffsetHeadTapeT {
    TensorT<T> concat;
    CaTapeT<T> att;
    TensorT<T> att_out;
    TensorT<T> h1_pre;
    TensorT<T> h1;
};

template <typename T>
OffsetFieldT<T> offset_head_forward(const TensorT<T>& fx, const TensorT<T>& fy,
                                    const OffsetHeadT<T>& head,
                                    OffsetHeadTapeT<T>* tape = nullptr);

// Accumulates parameter gradients in-place; returns (dFx, dFy).
template <typename T>
std::pair<TensorT<T>, TensorT<T>> offset_head_backward(OffsetHeadT<T>& head,
                                                       const OffsetHeadTapeT<T>& tape,
                                                       const TensorT<T>& grad_theta);

// .grad accumulation helpers shared by the composite backwards.
template <typename T>
void accumulate_grad(TensorT<T>& param, const TensorT<T>& g) {
    param.alloc_grad();
    if (!param.same_shape(g)) throw DimError("accumulate_grad: shape mismatch");
    for (size_t i = 0; i < g.data.size(); ++i) param.grad[i] += g.data[i];
}

}  // namespace sdan
