#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace vseg {

inline constexpr double kEdtInfinity = std::numeric_limits<double>::infinity();

// Exact squared Euclidean distance field to the set of site voxels
// (sites[i] != 0), with per-axis physical spacing. Separable lower-envelope
// transform, exact up to floating-point rounding; not a chamfer
// approximation. If there are no sites every entry is +infinity.
//
// Grid layout matches Volume: x-fastest, then y, then z.
std::vector<double> squared_distance_field(const std::vector<uint8_t>& sites, int width,
                                           int height, int depth,
                                           const std::array<double, 3>& spacing);

// 2D convenience with unit pixel spacing (width x height, x-fastest).
std::vector<double> squared_distance_field_2d(const std::vector<uint8_t>& sites, int width,
                                              int height);

}  // namespace vseg
