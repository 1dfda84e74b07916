#pragma once

// Per-element formulas shared by the serial and OpenMP kernels. Keeping them
// in one place is what makes the two back ends bit-identical.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "winsorcam/kernels.hpp"

namespace winsorcam::kernels::detail {

inline double conv3x3_at(std::span<const double> input, Dims3 in, std::span<const double> weight,
                         double bias, std::size_t o, std::size_t y, std::size_t x) {
    double acc = bias;
    const std::size_t C = in.channels, H = in.height, W = in.width;
    for (std::size_t c = 0; c < C; ++c) {
        const double* w = weight.data() + (o * C + c) * 9;
        const double* src = input.data() + c * H * W;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            if (y + ky < 1 || y + ky - 1 >= H) continue;
            const std::size_t iy = y + ky - 1;
            for (std::size_t kx = 0; kx < 3; ++kx) {
                if (x + kx < 1 || x + kx - 1 >= W) continue;
                acc += w[ky * 3 + kx] * src[iy * W + (x + kx - 1)];
            }
        }
    }
    return acc;
}

inline double conv3x3_grad_input_at(std::span<const double> grad_output, std::size_t out_channels,
                                    std::span<const double> weight, Dims3 in, std::size_t c,
                                    std::size_t y, std::size_t x) {
    // Output position (oy, ox) reads input (oy + ky - 1, ox + kx - 1).
    double acc = 0.0;
    const std::size_t C = in.channels, H = in.height, W = in.width;
    for (std::size_t o = 0; o < out_channels; ++o) {
        const double* w = weight.data() + (o * C + c) * 9;
        const double* g = grad_output.data() + o * H * W;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            if (y + 1 < ky || y + 1 - ky >= H) continue;
            const std::size_t oy = y + 1 - ky;
            for (std::size_t kx = 0; kx < 3; ++kx) {
                if (x + 1 < kx || x + 1 - kx >= W) continue;
                acc += w[ky * 3 + kx] * g[oy * W + (x + 1 - kx)];
            }
        }
    }
    return acc;
}

struct LerpCoord {
    std::size_t lo;
    std::size_t hi;
    double frac;
};

// Half-pixel centres without corner alignment: src = (dst + 0.5) * in / out - 0.5.
inline LerpCoord bilinear_coord(std::size_t dst, std::size_t n_in, std::size_t n_out) {
    double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n_in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, n_in - 1);
    return {lo, hi, s - static_cast<double>(lo)};
}

// Nearest source centre, integer arithmetic: floor((2*dst + 1) * in / (2 * out)).
inline std::size_t nearest_coord(std::size_t dst, std::size_t n_in, std::size_t n_out) {
    return std::min((2 * dst + 1) * n_in / (2 * n_out), n_in - 1);
}

inline double bilinear_at(std::span<const double> src, std::size_t w_in, const LerpCoord& cy,
                          const LerpCoord& cx) {
    const double a = src[cy.lo * w_in + cx.lo];
    const double b = src[cy.lo * w_in + cx.hi];
    const double c = src[cy.hi * w_in + cx.lo];
    const double d = src[cy.hi * w_in + cx.hi];
    const double top = a + cx.frac * (b - a);
    const double bottom = c + cx.frac * (d - c);
    const double v = top + cy.frac * (bottom - top);
    // Rounding in the lerps may step one ulp outside the corner range.
    const double lo = std::min(std::min(a, b), std::min(c, d));
    const double hi = std::max(std::max(a, b), std::max(c, d));
    return std::clamp(v, lo, hi);
}

inline double plane_mean(std::span<const double> planes, std::size_t k, std::size_t plane) {
    double acc = 0.0;
    const double* p = planes.data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    return acc / static_cast<double>(plane);
}

inline double weighted_sum_at(std::span<const double> planes, std::span<const double> weights,
                              std::size_t plane, bool relu, std::size_t u) {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) acc += weights[k] * planes[k * plane + u];
    if (relu && !(acc > 0.0)) return 0.0;
    return acc;
}

}  // namespace winsorcam::kernels::detail
