#include "sdan/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sdan/serialize.hpp"

namespace sdan {

template <typename T>
SdanModelT<T> make_model(const ModelConfig& cfg) {
    cfg.validate();
    SdanModelT<T> m;
    m.config = cfg;
    const int C = cfg.base_channels;
    const std::uint64_t s = cfg.seed;

    m.feat = make_conv<T>(C, cfg.in_channels, 3, 1, derive_seed(s, 1));
    if (cfg.align_enabled)
        m.head = make_offset_head<T>(C, cfg.attention, cfg.offset_mode, cfg.pack_k, cfg.deform_k,
                                     derive_seed(s, 2));
    m.dcn = make_conv<T>(C, C, cfg.deform_k, cfg.deform_k / 2, derive_seed(s, 3));
    m.align_head = make_conv<T>(cfg.in_channels, C, 3, 1, derive_seed(s, 4));
    for (int i = 0; i < cfg.num_res_blocks; ++i) {
        ResBlockT<T> b;
        b.conv1 = make_conv<T>(C, C, 3, 1, derive_seed(s, 100 + 2 * i));
        b.conv2 = make_conv<T>(C, C, 3, 1, derive_seed(s, 101 + 2 * i));
        m.blocks.push_back(std::move(b));
    }
    for (int i = 0; i < cfg.upsample_stages(); ++i)
        m.upsample.push_back(make_conv<T>(4 * C, C, 3, 1, derive_seed(s, 200 + i)));
    m.out_conv = make_conv<T>(3, C, 3, 1, derive_seed(s, 5));
    return m;
}

template <typename T>
ForwardOutputT<T> forward(const SdanModelT<T>& model, const TensorT<T>& x,
                          const TensorT<T>& yref, ModelTapeT<T>* tape) {
    const ModelConfig& cfg = model.config;
    if (x.c != cfg.in_channels)
        throw DimError("forward: input has " + std::to_string(x.c) + " channels, config wants " +
                       std::to_string(cfg.in_channels));
    ModelTapeT<T> local;
    ModelTapeT<T>& t = tape ? *tape : local;
    t.x = x;

    t.fx_pre = conv2d(x, model.feat);
    t.fx = activation(t.fx_pre, Act::relu);

    ForwardOutputT<T> out;
    if (cfg.align_enabled) {
        if (!x.same_shape(yref))
            throw DimError("forward: X " + x.shape_str() + " vs Yref " + yref.shape_str());
        t.yref = yref;
        if (cfg.flip_aug) {
            t.fy = flip_augmented_reference(yref, model.feat, &t.flip_ref);
        } else {
            t.fy_pre = conv2d(yref, model.feat);
            t.fy = activation(t.fy_pre, Act::relu);
        }
        out.offsets = offset_head_forward(t.fx, t.fy, model.head, &t.head);
        t.fxp = deform_conv_forward(t.fx, out.offsets, model.dcn);
        out.mask_lr = validity_mask(out.offsets, x.h, x.w);
    } else {
        // Severed offset path: plain convolution, everything valid.
        out.offsets = OffsetFieldT<T>::zeros(cfg.offset_mode, x.n, x.h, x.w, cfg.deform_k);
        t.fxp = conv2d(t.fx, model.dcn);
        out.mask_lr = ValidityMaskT<T>::ones(x.n, x.h, x.w);
    }
    out.mask_hr = upsample_mask(out.mask_lr, cfg.hr_factor());
    out.aligned = conv2d(t.fxp, model.align_head);

    TensorT<T> trunk = t.fxp;
    t.block_in.clear();
    t.block_mid_pre.clear();
    t.block_mid.clear();
    for (const auto& b : model.blocks) {
        t.block_in.push_back(trunk);
        TensorT<T> mid_pre = conv2d(trunk, b.conv1);
        TensorT<T> mid = activation(mid_pre, Act::relu);
        TensorT<T> res = conv2d(mid, b.conv2);
        add_scaled(trunk, res, T(1));
        t.block_mid_pre.push_back(std::move(mid_pre));
        t.block_mid.push_back(std::move(mid));
    }
    t.up_in.clear();
    t.up_shuffled.clear();
    for (const auto& u : model.upsample) {
        t.up_in.push_back(trunk);
        TensorT<T> pre = conv2d(trunk, u);
        TensorT<T> shuffled = depth_to_space(pre, 2);
        trunk = activation(shuffled, Act::relu);
        t.up_shuffled.push_back(std::move(shuffled));
    }
    t.trunk_out = trunk;
    out.zoomed = conv2d(trunk, model.out_conv);
    return out;
}

template <typename T>
TensorT<T> infer(const SdanModelT<T>& model, const TensorT<T>& x) {
    return forward(model, x, x).zoomed;
}

namespace {

template <typename T>
void accumulate_conv(ConvParamsT<T>& p, const Conv2dGradsT<T>& g) {
    accumulate_grad(p.weight, g.weight);
    accumulate_grad(p.bias, g.bias);
}

}  // namespace

template <typename T>
void backward(SdanModelT<T>& model, const ModelTapeT<T>& tape, const ForwardOutputT<T>& out,
              const TensorT<T>& grad_zoomed, const TensorT<T>& grad_aligned) {
    const ModelConfig& cfg = model.config;

    Conv2dGradsT<T> g_out = conv2d_backward(tape.trunk_out, model.out_conv, grad_zoomed);
    accumulate_conv(model.out_conv, g_out);
    TensorT<T> d_trunk = std::move(g_out.input);

    for (int i = static_cast<int>(model.upsample.size()) - 1; i >= 0; --i) {
        TensorT<T> d_shuffled = activation_backward(tape.up_shuffled[i], Act::relu, d_trunk);
        TensorT<T> d_pre = space_to_depth(d_shuffled, 2);
        Conv2dGradsT<T> g = conv2d_backward(tape.up_in[i], model.upsample[i], d_pre);
        accumulate_conv(model.upsample[i], g);
        d_trunk = std::move(g.input);
    }
    for (int i = static_cast<int>(model.blocks.size()) - 1; i >= 0; --i) {
        Conv2dGradsT<T> g2 = conv2d_backward(tape.block_mid[i], model.blocks[i].conv2, d_trunk);
        accumulate_conv(model.blocks[i].conv2, g2);
        TensorT<T> d_mid_pre = activation_backward(tape.block_mid_pre[i], Act::relu, g2.input);
        Conv2dGradsT<T> g1 = conv2d_backward(tape.block_in[i], model.blocks[i].conv1, d_mid_pre);
        accumulate_conv(model.blocks[i].conv1, g1);
        add_scaled(d_trunk, g1.input, T(1));  // skip connection
    }

    Conv2dGradsT<T> g_align = conv2d_backward(tape.fxp, model.align_head, grad_aligned);
    accumulate_conv(model.align_head, g_align);
    TensorT<T> d_fxp = std::move(d_trunk);
    add_scaled(d_fxp, g_align.input, T(1));

    TensorT<T> d_fx;
    if (cfg.align_enabled) {
        DeformConvGradsT<T> g_dcn =
            deform_conv_backward(tape.fx, out.offsets, model.dcn, d_fxp);
        accumulate_grad(model.dcn.weight, g_dcn.weight);
        accumulate_grad(model.dcn.bias, g_dcn.bias);
        d_fx = std::move(g_dcn.feature);

        auto [d_fx_head, d_fy] =
            offset_head_backward(model.head, tape.head, g_dcn.offsets);
        add_scaled(d_fx, d_fx_head, T(1));

        if (cfg.flip_aug) {
            flip_augmented_reference_backward(model.feat, tape.flip_ref, d_fy);
        } else {
            TensorT<T> d_fy_pre = activation_backward(tape.fy_pre, Act::relu, d_fy);
            Conv2dGradsT<T> g_feat_y = conv2d_backward(tape.yref, model.feat, d_fy_pre);
            accumulate_conv(model.feat, g_feat_y);
        }
    } else {
        Conv2dGradsT<T> g_dcn = conv2d_backward(tape.fx, model.dcn, d_fxp);
        accumulate_grad(model.dcn.weight, g_dcn.weight);
        accumulate_grad(model.dcn.bias, g_dcn.bias);
        d_fx = std::move(g_dcn.input);
    }

    TensorT<T> d_fx_pre = activation_backward(tape.fx_pre, Act::relu, d_fx);
    Conv2dGradsT<T> g_feat_x = conv2d_backward(tape.x, model.feat, d_fx_pre);
    accumulate_conv(model.feat, g_feat_x);
}

template <typename T>
void zero_grads(SdanModelT<T>& model) {
    visit_params(model, [](const std::string&, TensorT<T>& p) {
        p.alloc_grad();
        p.zero_grad();
    });
}

template <typename T>
double l1_loss(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b))
        throw DimError("l1_loss: " + a.shape_str() + " vs " + b.shape_str());
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        acc += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    return acc / static_cast<double>(a.data.size());
}

template <typename T>
double misaligned_l1(const TensorT<T>& a, const TensorT<T>& b, double dy, double dx) {
    if (!a.same_shape(b))
        throw DimError("misaligned_l1: " + a.shape_str() + " vs " + b.shape_str());
    double acc = 0.0;
    long count = 0;
    for (int s = 0; s < b.n; ++s)
        for (int y = 0; y < b.h; ++y)
            for (int x = 0; x < b.w; ++x) {
                double sy = y + dy, sx = x + dx;
                if (sy < 0.0 || sy > b.h - 1.0 || sx < 0.0 || sx > b.w - 1.0) continue;
                for (int ch = 0; ch < b.c; ++ch) {
                    double av = bilinear_sample(a, s, ch, static_cast<T>(sy), static_cast<T>(sx));
                    acc += std::abs(av - static_cast<double>(b.at(s, ch, y, x)));
                    ++count;
                }
            }
    if (count == 0)
        throw UndefinedResultError("misaligned_l1: displacement maps every pixel out of range");
    return acc / static_cast<double>(count);
}

namespace {

template <typename T>
double masked_term(const TensorT<T>& pred, const TensorT<T>& target, const TensorT<T>& mask,
                   const char* what) {
    if (!pred.same_shape(target))
        throw DimError(std::string("masked_zoom_loss: ") + what + " shape mismatch, " +
                       pred.shape_str() + " vs " + target.shape_str());
    if (mask.h != pred.h || mask.w != pred.w || mask.n != pred.n)
        throw DimError(std::string("masked_zoom_loss: mask mismatch for ") + what);
    double acc = 0.0;
    long valid = 0;
    for (int s = 0; s < pred.n; ++s) {
        const T* m = mask.plane(s, 0);
        for (int ch = 0; ch < pred.c; ++ch) {
            const T* p = pred.plane(s, ch);
            const T* t = target.plane(s, ch);
            for (int i = 0; i < pred.h * pred.w; ++i)
                if (m[i] != T(0)) {
                    acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
                    ++valid;
                }
        }
    }
    if (valid == 0)
        throw UndefinedResultError(std::string("masked_zoom_loss: all-zero mask on ") + what);
    return acc / static_cast<double>(valid);
}

template <typename T>
TensorT<T> masked_term_backward(const TensorT<T>& pred, const TensorT<T>& target,
                                const TensorT<T>& mask) {
    long valid = 0;
    for (int s = 0; s < pred.n; ++s) {
        const T* m = mask.plane(s, 0);
        for (int i = 0; i < pred.h * pred.w; ++i)
            if (m[i] != T(0)) ++valid;
    }
    valid *= pred.c;
    TensorT<T> g(pred.n, pred.c, pred.h, pred.w);
    if (valid == 0) return g;
    const T inv = T(1) / static_cast<T>(valid);
    for (int s = 0; s < pred.n; ++s) {
        const T* m = mask.plane(s, 0);
        for (int ch = 0; ch < pred.c; ++ch) {
            const T* p = pred.plane(s, ch);
            const T* t = target.plane(s, ch);
            T* dst = g.plane(s, ch);
            for (int i = 0; i < pred.h * pred.w; ++i) {
                if (m[i] == T(0)) continue;
                T d = p[i] - t[i];
                dst[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
            }
        }
    }
    return g;
}

}  // namespace

template <typename T>
double masked_zoom_loss(const ForwardOutputT<T>& out, const TensorT<T>& y,
                        const TensorT<T>& yref) {
    return masked_term(out.aligned, yref, out.mask_lr.data, "X' vs Y'") +
           masked_term(out.zoomed, y, out.mask_hr.data, "zoomed vs Y");
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> masked_zoom_loss_backward(const ForwardOutputT<T>& out,
                                                            const TensorT<T>& y,
                                                            const TensorT<T>& yref) {
    TensorT<T> d_zoomed = masked_term_backward(out.zoomed, y, out.mask_hr.data);
    TensorT<T> d_aligned = masked_term_backward(out.aligned, yref, out.mask_lr.data);
    return {std::move(d_zoomed), std::move(d_aligned)};
}

template <typename T>
void adam_step(SdanModelT<T>& model, AdamStateT<T>& state, const AdamConfig& cfg) {
    std::vector<TensorT<T>*> params;
    visit_params(model, [&](const std::string&, TensorT<T>& p) { params.push_back(&p); });
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->numel(), T(0));
            state.v[i].assign(params[i]->numel(), T(0));
        }
    }
    if (state.m.size() != params.size())
        throw ConfigError("adam_step: optimizer state does not match model");

    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& p = *params[i];
        if (!p.has_grad()) continue;
        for (size_t j = 0; j < p.data.size(); ++j) {
            double g = p.grad[j];
            double m = cfg.beta1 * state.m[i][j] + (1.0 - cfg.beta1) * g;
            double v = cfg.beta2 * state.v[i][j] + (1.0 - cfg.beta2) * g * g;
            state.m[i][j] = static_cast<T>(m);
            state.v[i][j] = static_cast<T>(v);
            p.data[j] -= static_cast<T>(cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps));
        }
    }
}

template <typename T>
double train_step(SdanModelT<T>& model, const TensorT<T>& x, const TensorT<T>& y,
                  const TensorT<T>& yref, AdamStateT<T>& state, const AdamConfig& cfg) {
    ModelTapeT<T> tape;
    ForwardOutputT<T> out = forward(model, x, yref, &tape);
    double loss = masked_zoom_loss(out, y, yref);
    if (!std::isfinite(loss))
        throw DivergenceError("training diverged: non-finite loss at step " +
                                  std::to_string(state.step + 1),
                              state.step + 1);
    auto [d_zoomed, d_aligned] = masked_zoom_loss_backward(out, y, yref);
    zero_grads(model);
    backward(model, tape, out, d_zoomed, d_aligned);
    adam_step(model, state, cfg);
    return loss;
}

std::string serialize_config(const ModelConfig& cfg) {
    std::ostringstream out;
    out << "in_channels = " << cfg.in_channels << "\n";
    out << "base_channels = " << cfg.base_channels << "\n";
    out << "num_res_blocks = " << cfg.num_res_blocks << "\n";
    out << "scale = " << cfg.scale << "\n";
    out << "offset_mode = " << (cfg.offset_mode == OffsetMode::squared ? "squared" : "per-point")
        << "\n";
    out << "attention = "
        << (cfg.attention == AttentionKind::cpa
                ? "cpa"
                : (cfg.attention == AttentionKind::channel ? "channel" : "none"))
        << "\n";
    out << "flip_aug = " << (cfg.flip_aug ? "on" : "off") << "\n";
    out << "align_enabled = " << (cfg.align_enabled ? "on" : "off") << "\n";
    out << "pack_k = " << cfg.pack_k << "\n";
    out << "deform_k = " << cfg.deform_k << "\n";
    out << "seed = " << cfg.seed << "\n";
    return out.str();
}

ModelConfig parse_config(const std::string& text) {
    ModelConfig cfg;
    std::istringstream in(text);
    std::string line;
    auto parse_bool = [](const std::string& v, const std::string& key) {
        if (v == "on" || v == "true" || v == "1") return true;
        if (v == "off" || v == "false" || v == "0") return false;
        throw ConfigError("bad boolean for " + key + ": " + v);
    };
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r");
            size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "in_channels")
            cfg.in_channels = std::stoi(value);
        else if (key == "base_channels")
            cfg.base_channels = std::stoi(value);
        else if (key == "num_res_blocks")
            cfg.num_res_blocks = std::stoi(value);
        else if (key == "scale")
            cfg.scale = std::stoi(value);
        else if (key == "offset_mode") {
            if (value == "squared")
                cfg.offset_mode = OffsetMode::squared;
            else if (value == "per-point" || value == "per_point")
                cfg.offset_mode = OffsetMode::per_point;
            else
                throw ConfigError("bad offset_mode: " + value);
        } else if (key == "attention") {
            if (value == "cpa")
                cfg.attention = AttentionKind::cpa;
            else if (value == "channel")
                cfg.attention = AttentionKind::channel;
            else if (value == "none")
                cfg.attention = AttentionKind::none;
            else
                throw ConfigError("bad attention: " + value);
        } else if (key == "flip_aug")
            cfg.flip_aug = parse_bool(value, key);
        else if (key == "align_enabled")
            cfg.align_enabled = parse_bool(value, key);
        else if (key == "pack_k")
            cfg.pack_k = std::stoi(value);
        else if (key == "deform_k")
            cfg.deform_k = std::stoi(value);
        else if (key == "seed")
            cfg.seed = std::stoull(value);
        else
            throw ConfigError("unknown model config key: " + key);
    }
    cfg.validate();
    return cfg;
}

void save_checkpoint(const std::string& dir, SdanModel& model) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint dir: " + dir);

    std::ofstream cfg(dir + "/config.txt", std::ios::trunc);
    if (!cfg) throw IoError("cannot write " + dir + "/config.txt");
    cfg << serialize_config(model.config);

    std::ofstream manifest(dir + "/manifest.txt", std::ios::trunc);
    if (!manifest) throw IoError("cannot write " + dir + "/manifest.txt");
    visit_params(model, [&](const std::string& name, Tensor& p) {
        std::string role = name.find("fc") != std::string::npos
                               ? "attention_fc"
                               : (name.find("bias") != std::string::npos ? "conv_bias"
                                                                         : "conv_weight");
        manifest << name << "\t" << p.shape_str() << "\t" << role << "\n";
        save_tensor(dir + "/" + name + ".sdtn", p);
    });
}

SdanModel load_checkpoint(const std::string& dir) {
    std::ifstream cfg_in(dir + "/config.txt");
    if (!cfg_in) throw IoError("missing checkpoint config: " + dir + "/config.txt");
    std::stringstream buf;
    buf << cfg_in.rdbuf();
    ModelConfig cfg = parse_config(buf.str());
    SdanModel model = make_model<float>(cfg);
    visit_params(model, [&](const std::string& name, Tensor& p) {
        Tensor loaded = load_tensor(dir + "/" + name + ".sdtn");
        if (!loaded.same_shape(p))
            throw IoError("checkpoint tensor " + name + " has shape " + loaded.shape_str() +
                          ", expected " + p.shape_str());
        p.data = std::move(loaded.data);
    });
    return model;
}

#define SDAN_INSTANTIATE_MODEL(T)                                                              \
    template SdanModelT<T> make_model<T>(const ModelConfig&);                                  \
    template ForwardOutputT<T> forward<T>(const SdanModelT<T>&, const TensorT<T>&,             \
                                          const TensorT<T>&, ModelTapeT<T>*);                  \
    template TensorT<T> infer<T>(const SdanModelT<T>&, const TensorT<T>&);                     \
    template void backward<T>(SdanModelT<T>&, const ModelTapeT<T>&, const ForwardOutputT<T>&,  \
                              const TensorT<T>&, const TensorT<T>&);                           \
    template void zero_grads<T>(SdanModelT<T>&);                                               \
    template double l1_loss<T>(const TensorT<T>&, const TensorT<T>&);                          \
    template double misaligned_l1<T>(const TensorT<T>&, const TensorT<T>&, double, double);    \
    template double masked_zoom_loss<T>(const ForwardOutputT<T>&, const TensorT<T>&,           \
                                        const TensorT<T>&);                                    \
    template std::pair<TensorT<T>, TensorT<T>> masked_zoom_loss_backward<T>(                   \
        const ForwardOutputT<T>&, const TensorT<T>&, const TensorT<T>&);                       \
    template void adam_step<T>(SdanModelT<T>&, AdamStateT<T>&, const AdamConfig&);             \
    template double train_step<T>(SdanModelT<T>&, const TensorT<T>&, const TensorT<T>&,        \
                                  const TensorT<T>&, AdamStateT<T>&, const AdamConfig&);

SDAN_INSTANTIATE_MODEL(float)
SDAN_INSTANTIATE_MODEL(double)

}  // namespace sdan
