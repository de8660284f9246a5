#pragma once

#include <string>

#include "peva/synthworld.hpp"

namespace peva {

/// Binary PPM (P6), the only image format the project reads or writes.
void write_ppm(const std::string& path, const world::Frame& frame);
world::Frame read_ppm(const std::string& path);

/// PSNR over 8-bit RGB, capped at 99 dB for identical frames.
double psnr(const world::Frame& a, const world::Frame& b);

/// Mean absolute pixel difference in [0, 255].
double mean_abs_diff(const world::Frame& a, const world::Frame& b);

}  // namespace peva
