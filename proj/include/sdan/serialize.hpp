#pragma once

#include <string>

#include "sdan/tensor.hpp"

namespace sdan {

// SDTN binary tensor dump:
//   "SDTN" | u8 version (0x01) | u32le ndim (always 4) | 4x u32le dims (n,c,h,w)
//   | n*c*h*w IEEE-754 f32le, row-major.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace sdan
