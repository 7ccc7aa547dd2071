#pragma once

#include <string>

#include "sdan/tensor.hpp"

namespace sdan {

// 8-bit image I/O. PNG and binary PPM (P6), selected by file extension.
// Values map linearly to [0,1] on read; writes clamp to [0,1] and round.
// Single-channel tensors are written as gray (replicated RGB).
Tensor read_image(const std::string& path);
void write_image(const std::string& path, const Tensor& img);

}  // namespace sdan
