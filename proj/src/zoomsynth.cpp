#include "sdan/zoomsynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sdan/deform.hpp"
#include "sdan/image_io.hpp"
#include "sdan/ops.hpp"
#include "sdan/serialize.hpp"

namespace fs = std::filesystem;

namespace sdan {

std::pair<double, double> sample_shift(std::mt19937_64& rng, double shift_max, bool fractional) {
    if (shift_max == 0.0) return {0.0, 0.0};
    if (fractional) {
        double dy = (2.0 * Tensor::unit_real(rng) - 1.0) * shift_max;
        double dx = (2.0 * Tensor::unit_real(rng) - 1.0) * shift_max;
        return {dy, dx};
    }
    int m = static_cast<int>(std::floor(shift_max));
    auto draw = [&]() {
        return static_cast<double>(
            static_cast<long>(rng() % static_cast<std::uint64_t>(2 * m + 1)) - m);
    };
    double dy = draw();
    double dx = draw();
    return {dy, dx};
}

namespace {

Tensor crop(const Tensor& img, int oy, int ox, int size) {
    if (oy < 0 || ox < 0 || oy + size > img.h || ox + size > img.w)
        throw GenerationError("crop window out of bounds");
    Tensor out(img.n, img.c, size, size);
    for (int s = 0; s < img.n; ++s)
        for (int ch = 0; ch < img.c; ++ch)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    out.at(s, ch, y, x) = img.at(s, ch, oy + y, ox + x);
    return out;
}

// Sub-pixel window read for fractional shifts.
Tensor crop_bilinear(const Tensor& img, double oy, double ox, int size) {
    if (oy < 0.0 || ox < 0.0 || oy + size > img.h - 0.0 || ox + size > img.w - 0.0)
        throw GenerationError("fractional crop window out of bounds");
    Tensor out(img.n, img.c, size, size);
    for (int s = 0; s < img.n; ++s)
        for (int ch = 0; ch < img.c; ++ch)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    out.at(s, ch, y, x) = bilinear_sample(
                        img, s, ch, static_cast<float>(oy + y), static_cast<float>(ox + x));
    return out;
}

bool near_integer(double v) { return std::abs(v - std::round(v)) < 1e-12; }

}  // namespace

MisalignedPair synth_pair(const Tensor& source_hr, double dy, double dx, const GenConfig& cfg,
                          int crop_oy, int crop_ox) {
    cfg.validate();
    const int hr_size = cfg.crop_lr * cfg.scale;
    MisalignedPair pair;
    pair.dy = dy;
    pair.dx = dx;
    pair.scale = cfg.scale;
    pair.raw = cfg.raw_mode;

    pair.hr = crop(source_hr, crop_oy, crop_ox, hr_size);
    Tensor yref_rgb = box_downsample(pair.hr, cfg.scale);

    const double lr_oy = crop_oy - cfg.scale * dy;
    const double lr_ox = crop_ox - cfg.scale * dx;
    Tensor lr_window;
    if (near_integer(lr_oy) && near_integer(lr_ox))
        lr_window = crop(source_hr, static_cast<int>(std::lround(lr_oy)),
                         static_cast<int>(std::lround(lr_ox)), hr_size);
    else
        lr_window = crop_bilinear(source_hr, lr_oy, lr_ox, hr_size);
    Tensor lr_rgb = box_downsample(lr_window, cfg.scale);

    if (cfg.raw_mode) {
        pair.lr = bayer_pack(lr_rgb);
        pair.yref = bayer_pack(yref_rgb);
    } else {
        pair.lr = std::move(lr_rgb);
        pair.yref = std::move(yref_rgb);
    }
    return pair;
}

namespace {

std::string pair_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", index);
    return buf;
}

std::string format_shift(double v) {
    if (std::abs(v - std::round(v)) < 1e-12)
        return std::to_string(static_cast<long>(std::llround(v)));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::vector<MisalignedPair> generate_dataset(const GenConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const int hr_size = cfg.crop_lr * cfg.scale;
    const int margin = static_cast<int>(std::ceil(cfg.shift_max)) * cfg.scale;

    std::vector<std::string> files;
    try {
        for (const auto& e : fs::directory_iterator(cfg.source_dir))
            if (e.is_regular_file()) {
                std::string p = e.path().string();
                if (p.size() > 4) {
                    std::string ext = p.substr(p.size() - 4);
                    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
                    if (ext == ".png" || ext == ".ppm") files.push_back(p);
                }
            }
    } catch (const fs::filesystem_error&) {
        throw GenerationError("cannot read source directory: " + cfg.source_dir);
    }
    std::sort(files.begin(), files.end());

    std::vector<Tensor> sources;
    for (const auto& f : files) {
        try {
            Tensor img = read_image(f);
            if (img.h < hr_size + 2 * margin || img.w < hr_size + 2 * margin) {
                std::cerr << "warning: skipping undersized source " << f << " (" << img.w << "x"
                          << img.h << ")\n";
                continue;
            }
            sources.push_back(std::move(img));
        } catch (const IoError& e) {
            std::cerr << "warning: skipping unreadable source " << f << ": " << e.what() << "\n";
        }
    }
    if (sources.empty())
        throw GenerationError("no usable source images in " + cfg.source_dir + " (need >= " +
                              std::to_string(hr_size + 2 * margin) + " px per side)");

    std::vector<MisalignedPair> pairs;
    pairs.reserve(cfg.count);
    for (int i = 0; i < cfg.count; ++i) {
        // Independent stream per pair: parallel generation cannot reorder
        // results.
        std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        const Tensor& src = sources[rng() % sources.size()];
        auto [dy, dx] = sample_shift(rng, cfg.shift_max, cfg.fractional);
        const int span_y = src.h - hr_size - 2 * margin;
        const int span_x = src.w - hr_size - 2 * margin;
        int oy = margin + static_cast<int>(rng() % static_cast<std::uint64_t>(span_y + 1));
        int ox = margin + static_cast<int>(rng() % static_cast<std::uint64_t>(span_x + 1));
        MisalignedPair p = synth_pair(src, dy, dx, cfg, oy, ox);
        p.id = pair_id(i);
        pairs.push_back(std::move(p));
    }

    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir + "/pairs", ec);
        if (ec) throw IoError("cannot create dataset directory: " + out_dir);
        std::ofstream manifest(out_dir + "/manifest.tsv", std::ios::trunc);
        if (!manifest) throw IoError("cannot write manifest in " + out_dir);
        manifest << "id\tdy\tdx\tscale\tmode\n";
        for (const auto& p : pairs) {
            const std::string base = out_dir + "/pairs/" + p.id;
            save_tensor(base + ".lr.sdtn", p.lr);
            save_tensor(base + ".hr.sdtn", p.hr);
            save_tensor(base + ".yref.sdtn", p.yref);
            manifest << p.id << "\t" << format_shift(p.dy) << "\t" << format_shift(p.dx) << "\t"
                     << p.scale << "\t" << (p.raw ? "raw" : "rgb") << "\n";
        }
    }
    return pairs;
}

std::vector<MisalignedPair> load_dataset(const std::string& dir) {
    std::ifstream manifest(dir + "/manifest.tsv");
    if (!manifest) throw IoError("missing manifest: " + dir + "/manifest.tsv");
    std::string line;
    if (!std::getline(manifest, line)) throw IoError("empty manifest in " + dir);
    std::vector<MisalignedPair> pairs;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        MisalignedPair p;
        std::string dy, dx, scale, mode;
        if (!std::getline(row, p.id, '\t') || !std::getline(row, dy, '\t') ||
            !std::getline(row, dx, '\t') || !std::getline(row, scale, '\t') ||
            !std::getline(row, mode))
            throw IoError("malformed manifest row in " + dir + ": " + line);
        // "-" marks absent ground truth (e.g. hand-built evaluation sets)
        p.dy = dy == "-" ? std::nan("") : std::stod(dy);
        p.dx = dx == "-" ? std::nan("") : std::stod(dx);
        p.scale = std::stoi(scale);
        p.raw = mode == "raw";
        const std::string base = dir + "/pairs/" + p.id;
        p.lr = load_tensor(base + ".lr.sdtn");
        p.hr = load_tensor(base + ".hr.sdtn");
        p.yref = load_tensor(base + ".yref.sdtn");
        pairs.push_back(std::move(p));
    }
    if (pairs.empty()) throw IoError("manifest lists no pairs: " + dir);
    return pairs;
}

Tensor bayer_pack(const Tensor& rgb) {
    if (rgb.c != 3) throw DimError("bayer_pack: want 3 channels, got " + rgb.shape_str());
    if (rgb.h % 2 != 0 || rgb.w % 2 != 0)
        throw DimError("bayer_pack: spatial dims must be even, got " + rgb.shape_str());
    const int h = rgb.h / 2, w = rgb.w / 2;
    Tensor out(rgb.n, 4, h, w);
    for (int s = 0; s < rgb.n; ++s)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                out.at(s, 0, y, x) = rgb.at(s, 0, 2 * y, 2 * x);          // R
                out.at(s, 1, y, x) = rgb.at(s, 1, 2 * y, 2 * x + 1);      // G1
                out.at(s, 2, y, x) = rgb.at(s, 1, 2 * y + 1, 2 * x);      // G2
                out.at(s, 3, y, x) = rgb.at(s, 2, 2 * y + 1, 2 * x + 1);  // B
            }
    return out;
}

Tensor procedural_image(std::uint64_t seed, int h, int w) {
    std::mt19937_64 rng(splitmix64(seed));
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * Tensor::unit_real(rng); };

    // Shared luminance field. Ramps give the alignment loss a monotone pull
    // at any displacement; waves and blobs add localizable structure.
    std::vector<double> base(static_cast<size_t>(h) * w, 0.0);
    const double ra = uni(-0.5, 0.5), rb = uni(-0.5, 0.5);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            base[y * w + x] = ra * (static_cast<double>(y) / h) +
                              rb * (static_cast<double>(x) / w);
    for (int k = 0; k < 6; ++k) {
        double wav = uni(32.0, 256.0), ang = uni(0.0, 2.0 * M_PI), ph = uni(0.0, 2.0 * M_PI);
        double amp = uni(0.04, 0.12);
        double fy = std::sin(ang) / wav, fx = std::cos(ang) / wav;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                base[y * w + x] += amp * std::sin(2.0 * M_PI * (fy * y + fx * x) + ph);
    }
    for (int k = 0; k < 6; ++k) {
        double cy = uni(0.0, h), cx = uni(0.0, w), sig = uni(8.0, 48.0);
        double amp = uni(-0.3, 0.3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                base[y * w + x] += amp * std::exp(-d2 / (2.0 * sig * sig));
            }
    }
    for (int k = 0; k < 2; ++k) {
        double wav = uni(8.0, 24.0), ang = uni(0.0, 2.0 * M_PI), ph = uni(0.0, 2.0 * M_PI);
        double fy = std::sin(ang) / wav, fx = std::cos(ang) / wav;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                base[y * w + x] += 0.03 * std::sin(2.0 * M_PI * (fy * y + fx * x) + ph);
    }

    Tensor img(1, 3, h, w);
    for (int ch = 0; ch < 3; ++ch) {
        double gain = uni(0.7, 1.0), bias = uni(0.3, 0.5);
        double wav = uni(64.0, 256.0), ang = uni(0.0, 2.0 * M_PI), ph = uni(0.0, 2.0 * M_PI);
        double fy = std::sin(ang) / wav, fx = std::cos(ang) / wav;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = bias + gain * base[y * w + x] +
                           0.05 * std::sin(2.0 * M_PI * (fy * y + fx * x) + ph);
                img.at(0, ch, y, x) = static_cast<float>(std::clamp(v, 0.02, 0.98));
            }
    }
    return img;
}

}  // namespace sdan
