#pragma once

#include <string>
#include <vector>

#include "sdan/attention.hpp"
#include "sdan/deform.hpp"
#include "sdan/ops.hpp"
#include "sdan/tensor.hpp"

namespace sdan {

// Network-level configuration. scale must be a power of two (the upsampler
// is a chain of x2 pixel-shuffle stages). RAW mode (in_channels = 4) adds
// one extra stage because the packed mosaic lives at half resolution.
struct ModelConfig {
    int in_channels = 3;
    int base_channels = 64;
    int num_res_blocks = 4;
    int scale = 4;
    OffsetMode offset_mode = OffsetMode::squared;
    AttentionKind attention = AttentionKind::cpa;
    bool flip_aug = true;
    bool align_enabled = true;
    int pack_k = 4;
    int deform_k = 3;
    std::uint64_t seed = 0;

    int hr_factor() const { return scale * (in_channels == 4 ? 2 : 1); }

    int upsample_stages() const {
        int f = hr_factor(), stages = 0;
        while (f > 1) {
            f /= 2;
            ++stages;
        }
        return stages;
    }

    void validate() const {
        if (in_channels != 3 && in_channels != 4)
            throw ConfigError("in_channels must be 3 (RGB) or 4 (packed Bayer)");
        if (base_channels <= 0) throw ConfigError("base_channels must be positive");
        if (num_res_blocks <= 0) throw ConfigError("num_res_blocks must be positive");
        if (scale <= 0 || (scale & (scale - 1)) != 0)
            throw ConfigError("scale must be a positive power of 2");
        if (pack_k <= 0) throw ConfigError("pack_k must be positive");
        if (deform_k <= 0 || deform_k % 2 == 0) throw ConfigError("deform_k must be odd");
    }
};

template <typename T>
struct ResBlockT {
    ConvParamsT<T> conv1, conv2;
};

template <typename T>
struct SdanModelT {
    ModelConfig config;
    ConvParamsT<T> feat;        // shared X / Y' feature extraction
    OffsetHeadT<T> head;        // present iff align_enabled
    ConvParamsT<T> dcn;         // deformable alignment weights
    ConvParamsT<T> align_head;  // F^{X'} -> X'
    std::vector<ResBlockT<T>> blocks;
    std::vector<ConvParamsT<T>> upsample;  // C -> 4C per x2 stage
    ConvParamsT<T> out_conv;               // C -> 3
};
using SdanModel = SdanModelT<float>;

template <typename T>
SdanModelT<T> make_model(const ModelConfig& cfg);

template <typename T>
struct ForwardOutputT {
    TensorT<T> zoomed;   // (n, 3, f*h, f*w), f = hr_factor
    TensorT<T> aligned;  // (n, in_channels, h, w)
    ValidityMaskT<T> mask_hr;
    ValidityMaskT<T> mask_lr;
    OffsetFieldT<T> offsets;
};
using ForwardOutput = ForwardOutputT<float>;

template <typename T>
struct ModelTapeT {
    TensorT<T> x, yref;
    TensorT<T> fx_pre, fx;
    FlipRefTapeT<T> flip_ref;
    TensorT<T> fy_pre;  // plain reference branch only
    TensorT<T> fy;
    OffsetHeadTapeT<T> head;
    TensorT<T> fxp;
    std::vector<TensorT<T>> block_in, block_mid_pre, block_mid;
    std::vector<TensorT<T>> up_in, up_shuffled;
    TensorT<T> trunk_out;
};

template <typename T>
ForwardOutputT<T> forward(const SdanModelT<T>& model, const TensorT<T>& x, const TensorT<T>& yref,
                          ModelTapeT<T>* tape = nullptr);

// Inference feeds {X, X}.
template <typename T>
TensorT<T> infer(const SdanModelT<T>& model, const TensorT<T>& x);

// Accumulates parameter gradients into .grad buffers.
template <typename T>
void backward(SdanModelT<T>& model, const ModelTapeT<T>& tape, const ForwardOutputT<T>& out,
              const TensorT<T>& grad_zoomed, const TensorT<T>& grad_aligned);

template <typename T>
void zero_grads(SdanModelT<T>& model);

// Mean absolute difference over all elements.
template <typename T>
double l1_loss(const TensorT<T>& a, const TensorT<T>& b);

// Eq-2 style oracle loss under a known global displacement: mean over valid
// positions of |a(p + d) - b(p)|, bilinear for fractional d, positions whose
// mapped coordinate leaves the image excluded.
template <typename T>
double misaligned_l1(const TensorT<T>& a, const TensorT<T>& b, double dy, double dx);

// Mask-gated two-term loss; each term normalized by its count of valid
// (mask = 1) elements.
template <typename T>
double masked_zoom_loss(const ForwardOutputT<T>& out, const TensorT<T>& y,
                        const TensorT<T>& yref);

template <typename T>
std::pair<TensorT<T>, TensorT<T>> masked_zoom_loss_backward(const ForwardOutputT<T>& out,
                                                            const TensorT<T>& y,
                                                            const TensorT<T>& yref);

// Stable parameter traversal used by the optimizer, checkpoints, and the
// gradient checker. Order must not change across versions of a config.
template <typename T, typename F>
void visit_params(SdanModelT<T>& model, F&& fn) {
    fn("feat.weight", model.feat.weight);
    fn("feat.bias", model.feat.bias);
    if (model.config.align_enabled) {
        if (model.head.attention == AttentionKind::cpa) {
            fn("head.cpa.fc1", model.head.cpa.inner.fc1);
            fn("head.cpa.fc2", model.head.cpa.inner.fc2);
        } else if (model.head.attention == AttentionKind::channel) {
            fn("head.ca.fc1", model.head.ca.fc1);
            fn("head.ca.fc2", model.head.ca.fc2);
        }
        fn("head.conv1.weight", model.head.conv1.weight);
        fn("head.conv1.bias", model.head.conv1.bias);
        fn("head.conv2.weight", model.head.conv2.weight);
        fn("head.conv2.bias", model.head.conv2.bias);
    }
    fn("dcn.weight", model.dcn.weight);
    fn("dcn.bias", model.dcn.bias);
    fn("align.weight", model.align_head.weight);
    fn("align.bias", model.align_head.bias);
    for (size_t i = 0; i < model.blocks.size(); ++i) {
        std::string p = "block" + std::to_string(i);
        fn(p + ".conv1.weight", model.blocks[i].conv1.weight);
        fn(p + ".conv1.bias", model.blocks[i].conv1.bias);
        fn(p + ".conv2.weight", model.blocks[i].conv2.weight);
        fn(p + ".conv2.bias", model.blocks[i].conv2.bias);
    }
    for (size_t i = 0; i < model.upsample.size(); ++i) {
        std::string p = "up" + std::to_string(i);
        fn(p + ".weight", model.upsample[i].weight);
        fn(p + ".bias", model.upsample[i].bias);
    }
    fn("out.weight", model.out_conv.weight);
    fn("out.bias", model.out_conv.bias);
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamStateT {
    long step = 0;
    std::vector<std::vector<T>> m, v;  // per parameter, visit order
};
using AdamState = AdamStateT<float>;

template <typename T>
void adam_step(SdanModelT<T>& model, AdamStateT<T>& state, const AdamConfig& cfg);

// One optimization step on a stacked batch (X, Y, Yref). Returns the loss.
// Throws DivergenceError when the loss goes non-finite.
template <typename T>
double train_step(SdanModelT<T>& model, const TensorT<T>& x, const TensorT<T>& y,
                  const TensorT<T>& yref, AdamStateT<T>& state, const AdamConfig& cfg);

// Checkpoint directory: config.txt + manifest.txt + one SDTN dump per
// parameter.
void save_checkpoint(const std::string& dir, SdanModel& model);
SdanModel load_checkpoint(const std::string& dir);

std::string serialize_config(const ModelConfig& cfg);
ModelConfig parse_config(const std::string& text);

}  // namespace sdan
