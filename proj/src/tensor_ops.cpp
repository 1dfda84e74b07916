#include "winsorcam/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "winsorcam/kernels.hpp"

namespace winsorcam {

std::string_view to_string(Interp interp) noexcept {
    return interp == Interp::bilinear ? "bilinear" : "nearest";
}

Interp parse_interp(std::string_view name) {
    if (name == "bilinear") return Interp::bilinear;
    if (name == "nearest") return Interp::nearest;
    throw std::invalid_argument("unknown interpolation '" + std::string(name) + "' (expected bilinear|nearest)");
}

namespace {

void check_resample_args(const Tensor& map, std::size_t h_out, std::size_t w_out) {
    require_rank(map, 2, "interpolate");
    if (h_out == 0 || w_out == 0) {
        throw std::invalid_argument("interpolate: target size must be positive, got " + std::to_string(h_out) +
                                    "x" + std::to_string(w_out));
    }
}

}  // namespace

Tensor interp_bilinear(const Tensor& map, std::size_t h_out, std::size_t w_out) {
    check_resample_args(map, h_out, w_out);
    if (map.dim(0) == h_out && map.dim(1) == w_out) return map;
    Tensor out({h_out, w_out});
    kernels::resize_bilinear(map.values(), map.dim(0), map.dim(1), out.values(), h_out, w_out);
    return out;
}

Tensor interp_nearest(const Tensor& map, std::size_t h_out, std::size_t w_out) {
    check_resample_args(map, h_out, w_out);
    if (map.dim(0) == h_out && map.dim(1) == w_out) return map;
    Tensor out({h_out, w_out});
    kernels::resize_nearest(map.values(), map.dim(0), map.dim(1), out.values(), h_out, w_out);
    return out;
}

Tensor interpolate(const Tensor& map, std::size_t h_out, std::size_t w_out, Interp interp) {
    return interp == Interp::bilinear ? interp_bilinear(map, h_out, w_out) : interp_nearest(map, h_out, w_out);
}

Tensor minmax_normalize(const Tensor& map, double epsilon) {
    if (map.empty()) throw std::invalid_argument("minmax_normalize: empty map");
    if (!(epsilon > 0.0)) throw std::invalid_argument("minmax_normalize: epsilon must be positive");
    const double lo = map.min();
    const double denom = map.max() - lo + epsilon;
    Tensor out = map;
    for (double& v : out.values()) v = (v - lo) / denom;
    return out;
}

double quantile_linear(std::span<const double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile_linear: empty input");
    if (!(p >= 0.0 && p <= 100.0)) {
        throw std::invalid_argument("quantile_linear: p must lie in [0, 100], got " + std::to_string(p));
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(static_cast<std::size_t>(std::ceil(rank)), sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    // Clamped to keep the result monotone in p.
    return std::min(sorted[lo] + frac * (sorted[hi] - sorted[lo]), sorted[hi]);
}

}  // namespace winsorcam
