#include "sdan/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "sdan/gradcheck.hpp"
#include "sdan/image_io.hpp"
#include "sdan/metrics.hpp"
#include "sdan/model.hpp"
#include "sdan/serialize.hpp"
#include "sdan/zoomsynth.hpp"

namespace fs = std::filesystem;

namespace sdan {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitGradcheck = 5;

// Flat `key = value` config files with '#' comments. File values are spliced
// into argv as --key=value tokens for keys the command line does not already
// set, so explicit flags always win and unknown keys surface as normal
// unknown-option errors.
std::vector<std::string> expand_config_args(std::vector<std::string> args) {
    std::string cfg_path;
    std::vector<std::string> explicit_keys;
    for (size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) continue;
        std::string key = a.substr(0, a.find('='));
        explicit_keys.push_back(key);
        if (key == "--config") {
            if (a.find('=') != std::string::npos)
                cfg_path = a.substr(a.find('=') + 1);
            else if (i + 1 < args.size())
                cfg_path = args[i + 1];
        }
    }
    if (cfg_path.empty()) return args;

    std::ifstream in(cfg_path);
    if (!in) throw IoError("cannot open config file: " + cfg_path);
    std::string line;
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
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "config") throw ConfigError("config files cannot nest --config");
        std::string flag = "--" + key;
        if (std::find(explicit_keys.begin(), explicit_keys.end(), flag) != explicit_keys.end())
            continue;
        args.push_back(flag + "=" + value);
    }
    return args;
}

std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// Batched view over a list of pairs.
Tensor stack(const std::vector<const Tensor*>& parts) {
    const Tensor& first = *parts.front();
    Tensor out(static_cast<int>(parts.size()), first.c, first.h, first.w);
    const size_t stride = first.numel();
    for (size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i]->same_shape(first)) throw DimError("stack: ragged batch");
        std::copy_n(parts[i]->data.begin(), stride, out.data.begin() + i * stride);
    }
    return out;
}

struct TrainFlags {
    std::string data_dir, val_dir, out_dir;
    int epochs = 300;
    int batch = 4;
    double lr = 1e-4;
    int channels = 64;
    int blocks = 4;
    std::string offset_mode = "squared";
    std::string attention = "cpa";
    std::string flip_aug = "on";
    bool no_align = false;
    int pack_k = 4;
    int ckpt_every = 0;
    std::uint64_t seed = 0;
    std::string preset;
};

void apply_preset(TrainFlags& f) {
    if (f.preset.empty()) return;
    // Ablation rows: DCN / SDCN / +CL-Attention / +CP-Attention / ++Flip.
    if (f.preset == "table2-row-1") {
        f.offset_mode = "per-point";
        f.attention = "none";
        f.flip_aug = "off";
    } else if (f.preset == "table2-row-2") {
        f.offset_mode = "squared";
        f.attention = "none";
        f.flip_aug = "off";
    } else if (f.preset == "table2-row-3") {
        f.offset_mode = "squared";
        f.attention = "channel";
        f.flip_aug = "off";
    } else if (f.preset == "table2-row-4") {
        f.offset_mode = "squared";
        f.attention = "cpa";
        f.flip_aug = "off";
    } else if (f.preset == "table2-row-5") {
        f.offset_mode = "squared";
        f.attention = "cpa";
        f.flip_aug = "on";
    } else {
        throw ConfigError("unknown preset: " + f.preset + " (want table2-row-1..5)");
    }
}

OffsetMode parse_offset_mode(const std::string& s) {
    if (s == "squared") return OffsetMode::squared;
    if (s == "per-point" || s == "per_point") return OffsetMode::per_point;
    throw ConfigError("bad --offset-mode: " + s);
}

AttentionKind parse_attention(const std::string& s) {
    if (s == "cpa") return AttentionKind::cpa;
    if (s == "channel") return AttentionKind::channel;
    if (s == "none") return AttentionKind::none;
    throw ConfigError("bad --attention: " + s);
}

bool parse_on_off(const std::string& s, const char* what) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw ConfigError(std::string("bad ") + what + ": " + s + " (want on|off)");
}

struct EvalRow {
    std::string id;
    double psnr_db = 0.0, ssim_v = 0.0, cx = 0.0, offset_err = 0.0;
    bool has_offset = false;
};

// Reference-mode evaluation: forward(X, Y') per pair, PSNR over mask-valid
// HR pixels, SSIM on the full frame, contextual distance on strided 3x3
// patches, offset error = |mean valid offset - truth|.
EvalRow eval_pair(SdanModel& model, const MisalignedPair& pair, int cx_stride) {
    EvalRow row;
    row.id = pair.id;
    ForwardOutput out = forward(model, pair.lr, pair.yref);
    row.psnr_db = psnr_masked(out.zoomed, pair.hr, out.mask_hr.data);
    row.ssim_v = ssim(out.zoomed, pair.hr);
    row.cx = contextual_distance(patch_features(out.zoomed, 3, cx_stride),
                                 patch_features(pair.hr, 3, cx_stride));
    if (!std::isnan(pair.dy)) {
        double my = 0.0, mx = 0.0;
        long count = 0;
        const int pairs_n = out.offsets.data.c / 2;
        for (int y = 0; y < out.offsets.data.h; ++y)
            for (int x = 0; x < out.offsets.data.w; ++x) {
                if (out.mask_lr.data.at(0, 0, y, x) == 0.f) continue;
                for (int t = 0; t < pairs_n; ++t) {
                    my += out.offsets.data.at(0, 2 * t, y, x);
                    mx += out.offsets.data.at(0, 2 * t + 1, y, x);
                }
                ++count;
            }
        if (count > 0) {
            my /= static_cast<double>(count) * pairs_n;
            mx /= static_cast<double>(count) * pairs_n;
        }
        row.offset_err = std::hypot(my - pair.dy, mx - pair.dx);
        row.has_offset = true;
    }
    return row;
}

int cmd_gen_data(const GenConfig& cfg, const std::string& out_dir) {
    std::cout << "[sdan gen-data] src=" << cfg.source_dir << " out=" << out_dir
              << " count=" << cfg.count << " scale=" << cfg.scale << " crop=" << cfg.crop_lr
              << " shift-max=" << cfg.shift_max << " mode=" << (cfg.raw_mode ? "raw" : "rgb")
              << " frac=" << (cfg.fractional ? "on" : "off") << " seed=" << cfg.seed << "\n";
    std::vector<MisalignedPair> pairs;
    try {
        pairs = generate_dataset(cfg, out_dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(out_dir, ec);
        throw;
    }
    double ady = 0, adx = 0, mdy = 0, mdx = 0;
    for (const auto& p : pairs) {
        ady += std::abs(p.dy);
        adx += std::abs(p.dx);
        mdy = std::max(mdy, std::abs(p.dy));
        mdx = std::max(mdx, std::abs(p.dx));
    }
    std::cout << "wrote " << pairs.size() << " pairs; mean|dy|=" << fmt(ady / pairs.size(), 3)
              << " mean|dx|=" << fmt(adx / pairs.size(), 3) << " max|dy|=" << fmt(mdy, 3)
              << " max|dx|=" << fmt(mdx, 3) << "\n";
    return kExitOk;
}

int cmd_train(const TrainFlags& flags, bool deterministic) {
    auto pairs = load_dataset(flags.data_dir);
    std::vector<MisalignedPair> val;
    if (!flags.val_dir.empty()) val = load_dataset(flags.val_dir);

    ModelConfig cfg;
    cfg.in_channels = pairs.front().lr.c;
    cfg.scale = pairs.front().scale;
    cfg.base_channels = flags.channels;
    cfg.num_res_blocks = flags.blocks;
    cfg.offset_mode = parse_offset_mode(flags.offset_mode);
    cfg.attention = parse_attention(flags.attention);
    cfg.flip_aug = parse_on_off(flags.flip_aug, "--flip-aug");
    cfg.align_enabled = !flags.no_align;
    cfg.pack_k = flags.pack_k;
    cfg.seed = flags.seed;
    cfg.validate();
    for (const auto& p : pairs)
        if (p.hr.h != p.lr.h * cfg.hr_factor() || p.lr.c != cfg.in_channels)
            throw ConfigError("dataset pair " + p.id + " does not match the model geometry");

    std::cout << "[sdan train] data=" << flags.data_dir << " val=" << flags.val_dir
              << " out=" << flags.out_dir << " epochs=" << flags.epochs
              << " batch=" << flags.batch << " lr=" << fmt(flags.lr, 6)
              << " channels=" << cfg.base_channels << " blocks=" << cfg.num_res_blocks
              << " scale=" << cfg.scale << " in-channels=" << cfg.in_channels
              << " offset-mode=" << flags.offset_mode << " attention=" << flags.attention
              << " flip-aug=" << flags.flip_aug << " align=" << (cfg.align_enabled ? "on" : "off")
              << " pack-k=" << cfg.pack_k << " seed=" << cfg.seed
              << " deterministic=" << (deterministic ? "on" : "off") << "\n";

    SdanModel model = make_model<float>(cfg);
    AdamState opt;
    AdamConfig adam;
    adam.lr = flags.lr;

    std::error_code ec;
    fs::create_directories(flags.out_dir, ec);
    if (ec) throw IoError("cannot create output dir: " + flags.out_dir);
    std::ofstream loss_csv(flags.out_dir + "/loss.csv", std::ios::trunc);
    if (!loss_csv) throw IoError("cannot write loss.csv in " + flags.out_dir);
    loss_csv << "epoch,mean_loss,val_psnr,val_ssim\n";

    double best_psnr = -1.0, best_ssim = 0.0;
    std::vector<size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    const auto t0 = std::chrono::steady_clock::now();

    for (int epoch = 1; epoch <= flags.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0x5d00 + epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng() % i]);

        double loss_sum = 0.0;
        long steps = 0;
        for (size_t start = 0; start < order.size(); start += flags.batch) {
            size_t stop = std::min(order.size(), start + flags.batch);
            std::vector<const Tensor*> xs, ys, yrefs;
            for (size_t i = start; i < stop; ++i) {
                xs.push_back(&pairs[order[i]].lr);
                ys.push_back(&pairs[order[i]].hr);
                yrefs.push_back(&pairs[order[i]].yref);
            }
            loss_sum += train_step(model, stack(xs), stack(ys), stack(yrefs), opt, adam);
            ++steps;
        }
        double mean_loss = loss_sum / std::max(1L, steps);

        double val_psnr = 0.0, val_ssim = 0.0;
        if (!val.empty()) {
            for (const auto& p : val) {
                ForwardOutput out = forward(model, p.lr, p.yref);
                val_psnr += psnr_masked(out.zoomed, p.hr, out.mask_hr.data);
                val_ssim += ssim(out.zoomed, p.hr);
            }
            val_psnr /= static_cast<double>(val.size());
            val_ssim /= static_cast<double>(val.size());
            if (val_psnr > best_psnr) {
                best_psnr = val_psnr;
                best_ssim = val_ssim;
                save_checkpoint(flags.out_dir + "/ckpt-best", model);
            }
        }
        loss_csv << epoch << "," << fmt(mean_loss, 9);
        if (val.empty())
            loss_csv << ",,";
        else
            loss_csv << "," << fmt(val_psnr, 4) << "," << fmt(val_ssim, 6);
        loss_csv << "\n";
        loss_csv.flush();
        std::cout << "epoch " << epoch << " loss=" << fmt(mean_loss, 7);
        if (!val.empty())
            std::cout << " val_psnr=" << fmt(val_psnr, 3) << " val_ssim=" << fmt(val_ssim, 5);
        std::cout << "\n";
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "epoch " << epoch << " done at t=" << fmt(secs, 1) << "s\n";

        if (flags.ckpt_every > 0 && epoch % flags.ckpt_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "/ckpt-epoch%04d", epoch);
            save_checkpoint(flags.out_dir + name, model);
        }
    }
    save_checkpoint(flags.out_dir + "/ckpt-final", model);
    if (!val.empty())
        std::cout << "best validation PSNR=" << fmt(best_psnr, 3)
                  << " dB SSIM=" << fmt(best_ssim, 5) << "\n";
    else
        std::cout << "training complete (no validation set)\n";
    return kExitOk;
}

int cmd_infer(const std::string& ckpt, const std::string& input, const std::string& output,
              const std::string& dump_offsets, const std::string& dump_mask) {
    SdanModel model = load_checkpoint(ckpt);
    Tensor img = read_image(input);
    if (model.config.in_channels == 4) img = bayer_pack(img);
    std::cout << "[sdan infer] ckpt=" << ckpt << " input=" << input << " (" << img.shape_str()
              << ") out=" << output << "\n";
    ForwardOutput out = forward(model, img, img);
    write_image(output, out.zoomed);
    if (!dump_offsets.empty()) save_tensor(dump_offsets, out.offsets.data);
    if (!dump_mask.empty()) {
        Tensor gray = out.mask_hr.data;
        write_image(dump_mask, gray);
    }
    std::cout << "wrote " << output << " (" << out.zoomed.shape_str() << ")\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& out_csv,
             int cx_stride) {
    SdanModel model = load_checkpoint(ckpt);
    auto pairs = load_dataset(data_dir);
    std::cout << "[sdan eval] ckpt=" << ckpt << " data=" << data_dir << " pairs=" << pairs.size()
              << " out=" << out_csv << " cx-stride=" << cx_stride << "\n";

    std::vector<EvalRow> rows;
    for (const auto& p : pairs) rows.push_back(eval_pair(model, p, cx_stride));
    const bool with_offsets =
        std::all_of(rows.begin(), rows.end(), [](const EvalRow& r) { return r.has_offset; });

    std::ofstream csv;
    std::ostream* out = &std::cout;
    if (!out_csv.empty()) {
        csv.open(out_csv, std::ios::trunc);
        if (!csv) throw IoError("cannot write " + out_csv);
        out = &csv;
    }
    *out << "id,psnr_db,ssim,cx_distance";
    if (with_offsets) *out << ",offset_err";
    *out << "\n";
    EvalRow mean;
    for (const auto& r : rows) {
        *out << r.id << "," << fmt(r.psnr_db, 4) << "," << fmt(r.ssim_v, 6) << ","
             << fmt(r.cx, 6);
        if (with_offsets) *out << "," << fmt(r.offset_err, 4);
        *out << "\n";
        mean.psnr_db += r.psnr_db;
        mean.ssim_v += r.ssim_v;
        mean.cx += r.cx;
        mean.offset_err += r.offset_err;
    }
    const double n = static_cast<double>(rows.size());
    *out << "mean," << fmt(mean.psnr_db / n, 4) << "," << fmt(mean.ssim_v / n, 6) << ","
         << fmt(mean.cx / n, 6);
    if (with_offsets) *out << "," << fmt(mean.offset_err / n, 4);
    *out << "\n";
    std::cout << "mean psnr=" << fmt(mean.psnr_db / n, 4) << " ssim=" << fmt(mean.ssim_v / n, 6);
    if (with_offsets) std::cout << " offset_err=" << fmt(mean.offset_err / n, 4);
    std::cout << "\n";
    return kExitOk;
}

int cmd_gradcheck(const GradcheckOptions& opts) {
    std::cout << "[sdan gradcheck] mode=" << (opts.f64 ? "f64" : "f32")
              << " trials=" << opts.trials << " seed=" << opts.seed
              << (opts.op_filter.empty() ? "" : " op=" + opts.op_filter)
              << (opts.inject_fault ? " inject-fault=on" : "") << "\n";
    auto results = run_gradcheck(opts);
    std::vector<std::string> failing;
    for (const auto& r : results) {
        std::printf("%-24s max_rel_err=%.3e tol=%.0e %s\n", r.op.c_str(), r.max_rel_err, r.tol,
                    r.pass ? "PASS" : "FAIL");
        if (!r.pass) failing.push_back(r.op);
    }
    if (!failing.empty()) {
        std::string names;
        for (const auto& f : failing) names += " " + f;
        std::cout << "gradcheck FAILED:" << names << "\n";
        return kExitGradcheck;
    }
    std::cout << "gradcheck passed (" << results.size() << " ops)\n";
    return kExitOk;
}

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"squared deformable alignment network toolkit"};
    app.require_subcommand(1);

    bool deterministic = false;
    app.add_flag("--deterministic", deterministic,
                 "pin reduction order / thread counts for bit-identical reruns");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic misaligned dataset");
    GenConfig gcfg;
    std::string gen_out;
    std::string gen_cfg_file;
    gen->add_option("--config", gen_cfg_file, "flat key = value config file");
    gen->add_option("--src", gcfg.source_dir, "directory of HR source images")->required();
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--count", gcfg.count, "number of pairs");
    gen->add_option("--scale", gcfg.scale, "zoom scale (power of 2)");
    gen->add_option("--crop", gcfg.crop_lr, "LR crop size");
    gen->add_option("--shift-max", gcfg.shift_max, "max |shift| in LR pixels");
    gen->add_option("--seed", gcfg.seed, "RNG seed");
    gen->add_flag("--frac-shifts", gcfg.fractional, "draw fractional shifts");
    std::string gen_mode = "rgb";
    gen->add_option("--mode", gen_mode, "rgb | raw")->check(CLI::IsMember({"rgb", "raw"}));

    // train
    auto* train = app.add_subcommand("train", "train a model on a generated dataset");
    TrainFlags tf;
    std::string train_cfg_file;
    train->add_option("--config", train_cfg_file, "flat key = value config file");
    train->add_option("--data", tf.data_dir, "training dataset directory")->required();
    train->add_option("--val", tf.val_dir, "validation dataset directory");
    train->add_option("--out", tf.out_dir, "output directory")->required();
    train->add_option("--epochs", tf.epochs, "training epochs");
    train->add_option("--batch", tf.batch, "batch size");
    train->add_option("--lr", tf.lr, "Adam learning rate");
    train->add_option("--channels", tf.channels, "base feature channels");
    train->add_option("--blocks", tf.blocks, "residual blocks");
    train->add_option("--offset-mode", tf.offset_mode, "squared | per-point");
    train->add_option("--attention", tf.attention, "none | channel | cpa");
    train->add_option("--flip-aug", tf.flip_aug, "on | off");
    train->add_flag("--no-align", tf.no_align, "sever the offset path (plain SR)");
    train->add_option("--pack-k", tf.pack_k, "CPA packing size");
    train->add_option("--ckpt-every", tf.ckpt_every, "checkpoint every N epochs (0 = final only)");
    train->add_option("--seed", tf.seed, "init / shuffle seed");
    train->add_option("--preset", tf.preset, "table2-row-1..5 ablation presets");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "super-resolve one image ({X, X} input)");
    std::string in_ckpt, in_img, in_out, in_dump_off, in_dump_mask;
    std::string infer_cfg_file;
    infer_cmd->add_option("--config", infer_cfg_file, "flat key = value config file");
    infer_cmd->add_option("--ckpt", in_ckpt, "checkpoint directory")->required();
    infer_cmd->add_option("--input", in_img, "input image (png/ppm)")->required();
    infer_cmd->add_option("--out", in_out, "output image path")->required();
    infer_cmd->add_option("--dump-offsets", in_dump_off, "write learned offsets as SDTN");
    infer_cmd->add_option("--dump-mask", in_dump_mask, "write validity mask as an image");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_ckpt, ev_data, ev_csv;
    int ev_stride = 4;
    std::string eval_cfg_file;
    eval_cmd->add_option("--config", eval_cfg_file, "flat key = value config file");
    eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("--data", ev_data, "dataset directory")->required();
    eval_cmd->add_option("--out", ev_csv, "CSV output path (default: stdout)");
    eval_cmd->add_option("--cx-stride", ev_stride, "patch stride for the contextual distance");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference checks for every backward");
    GradcheckOptions gopts;
    std::string gc_cfg_file;
    gc->add_option("--config", gc_cfg_file, "flat key = value config file");
    gc->add_flag("--f64", gopts.f64, "64-bit accumulation mode");
    gc->add_option("--op", gopts.op_filter, "run only this op's checks");
    gc->add_option("--trials", gopts.trials, "randomized trials per op");
    gc->add_option("--seed", gopts.seed, "RNG seed");
    gc->add_flag("--inject-fault", gopts.inject_fault,
                 "corrupt the deformable conv weight gradient (negative control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    set_deterministic(deterministic);
    thread_count();

    if (gen->parsed()) {
        gcfg.raw_mode = gen_mode == "raw";
        return cmd_gen_data(gcfg, gen_out);
    }
    if (train->parsed()) {
        apply_preset(tf);
        return cmd_train(tf, deterministic);
    }
    if (infer_cmd->parsed()) return cmd_infer(in_ckpt, in_img, in_out, in_dump_off, in_dump_mask);
    if (eval_cmd->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_csv, ev_stride);
    if (gc->parsed()) return cmd_gradcheck(gopts);
    return kExitConfig;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    try {
        std::vector<std::string> args;
        for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
        args = expand_config_args(std::move(args));
        std::vector<const char*> expanded;
        expanded.push_back(argc > 0 ? argv[0] : "sdan");
        for (const auto& a : args) expanded.push_back(a.c_str());
        return dispatch(static_cast<int>(expanded.size()), expanded.data());
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const GenerationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const UndefinedResultError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("sdan");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace sdan
