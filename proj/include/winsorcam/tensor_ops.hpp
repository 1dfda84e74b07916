#pragma once

#include <span>
#include <string_view>

#include "winsorcam/tensor.hpp"

namespace winsorcam {

enum class Interp { bilinear, nearest };

std::string_view to_string(Interp interp) noexcept;
Interp parse_interp(std::string_view name);

// Default epsilon for min-max normalization of saliency maps.
inline constexpr double kNormalizeEpsilon = 1e-6;

// Bilinear resampling of a 2-D map with half-pixel centres (align_corners = false).
// Throws std::invalid_argument on zero-sized targets or non-2-D input.
Tensor interp_bilinear(const Tensor& map, std::size_t h_out, std::size_t w_out);

// Nearest-centre resampling; integer upscaling by k replicates each cell into a k x k block.
Tensor interp_nearest(const Tensor& map, std::size_t h_out, std::size_t w_out);

Tensor interpolate(const Tensor& map, std::size_t h_out, std::size_t w_out, Interp interp);

// (M - min M) / (max M - min M + epsilon). Constant maps become all zeros.
Tensor minmax_normalize(const Tensor& map, double epsilon = kNormalizeEpsilon);

// Linear-interpolation quantile: sort ascending, rank r = (p/100)(n-1),
// v[floor r] + frac(r) * (v[ceil r] - v[floor r]). p in [0, 100].
double quantile_linear(std::span<const double> values, double p);

}  // namespace winsorcam
