#pragma once

#include <random>
#include <string>
#include <vector>

#include "sdan/tensor.hpp"

namespace sdan {

// One synthetic optical-zoom sample. lr and hr depict the same scene with
// lr displaced by exactly (dy, dx) LR pixels relative to yref, so
// misaligned_l1(lr, yref, dy, dx) vanishes on the overlap and a perfect
// alignment head would learn offsets equal to (dy, dx).
struct MisalignedPair {
    Tensor lr;    // (1, 3 or 4, h, w)
    Tensor hr;    // (1, 3, f*h, f*w)
    Tensor yref;  // same shape as lr
    double dy = 0.0, dx = 0.0;
    int scale = 4;
    bool raw = false;
    std::string id;
};

struct GenConfig {
    std::string source_dir;
    int scale = 4;
    int crop_lr = 64;
    double shift_max = 8.0;
    int count = 64;
    std::uint64_t seed = 0;
    bool raw_mode = false;
    bool fractional = false;

    void validate() const {
        if (scale <= 0 || (scale & (scale - 1)) != 0)
            throw ConfigError("gen: scale must be a positive power of 2");
        if (crop_lr <= 0) throw ConfigError("gen: crop size must be positive");
        if (shift_max < 0) throw ConfigError("gen: shift_max must be non-negative");
        if (count <= 0) throw ConfigError("gen: count must be positive");
        if (raw_mode && crop_lr % 2 != 0)
            throw ConfigError("gen: raw mode needs an even LR crop size");
    }
};

// Uniform shift draw in [-shift_max, shift_max]^2; integer lattice unless
// fractional.
std::pair<double, double> sample_shift(std::mt19937_64& rng, double shift_max, bool fractional);

// Cuts one pair out of an HR source image. crop_oy/ox are HR pixel
// coordinates of the reference window; the lr window sits at
// crop - scale*(dy, dx) so the recorded shift is the alignment ground truth.
MisalignedPair synth_pair(const Tensor& source_hr, double dy, double dx, const GenConfig& cfg,
                          int crop_oy, int crop_ox);

// Seed-deterministic dataset. Returns the pairs and, when out_dir is
// non-empty, persists them as pairs/NNNNNN.{lr,hr,yref}.sdtn plus
// manifest.tsv (id, dy, dx, scale, mode).
std::vector<MisalignedPair> generate_dataset(const GenConfig& cfg, const std::string& out_dir);

std::vector<MisalignedPair> load_dataset(const std::string& dir);

// RGGB mosaic simulation: (n,3,2h,2w) -> (n,4,h,w), channels [R, G1, G2, B]
// sampled at (even,even), (even,odd), (odd,even), (odd,odd).
Tensor bayer_pack(const Tensor& rgb);

// Procedural HR test texture: ramps + low-frequency waves + blobs + mild
// detail, values in (0,1). Used by the test-suites and as demo source data.
Tensor procedural_image(std::uint64_t seed, int h, int w);

}  // namespace sdan
