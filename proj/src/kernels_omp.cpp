#include "kernel_detail.hpp"
#include "winsorcam/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// Loop indices are signed for OpenMP worksharing.
namespace winsorcam::kernels::omp {

namespace {
using idx = std::ptrdiff_t;
inline idx sz(std::size_t n) { return static_cast<idx>(n); }
}  // namespace

void conv3x3_forward(std::span<const double> input, Dims3 in, std::span<const double> weight,
                     std::span<const double> bias, std::size_t out_channels, std::span<double> output) {
    const idx rows = sz(out_channels * in.height);
#pragma omp parallel for schedule(static)
    for (idx r = 0; r < rows; ++r) {
        const std::size_t o = static_cast<std::size_t>(r) / in.height;
        const std::size_t y = static_cast<std::size_t>(r) % in.height;
        for (std::size_t x = 0; x < in.width; ++x)
            output[(o * in.height + y) * in.width + x] = detail::conv3x3_at(input, in, weight, bias[o], o, y, x);
    }
}

void conv3x3_backward_input(std::span<const double> grad_output, std::size_t out_channels,
                            std::span<const double> weight, Dims3 in, std::span<double> grad_input) {
    const idx rows = sz(in.channels * in.height);
#pragma omp parallel for schedule(static)
    for (idx r = 0; r < rows; ++r) {
        const std::size_t c = static_cast<std::size_t>(r) / in.height;
        const std::size_t y = static_cast<std::size_t>(r) % in.height;
        for (std::size_t x = 0; x < in.width; ++x)
            grad_input[(c * in.height + y) * in.width + x] =
                detail::conv3x3_grad_input_at(grad_output, out_channels, weight, in, c, y, x);
    }
}

void resize_bilinear(std::span<const double> src, std::size_t h_in, std::size_t w_in, std::span<double> dst,
                     std::size_t h_out, std::size_t w_out) {
#pragma omp parallel for schedule(static)
    for (idx oy = 0; oy < sz(h_out); ++oy) {
        const auto cy = detail::bilinear_coord(static_cast<std::size_t>(oy), h_in, h_out);
        for (std::size_t ox = 0; ox < w_out; ++ox) {
            const auto cx = detail::bilinear_coord(ox, w_in, w_out);
            dst[static_cast<std::size_t>(oy) * w_out + ox] = detail::bilinear_at(src, w_in, cy, cx);
        }
    }
}

void resize_nearest(std::span<const double> src, std::size_t h_in, std::size_t w_in, std::span<double> dst,
                    std::size_t h_out, std::size_t w_out) {
#pragma omp parallel for schedule(static)
    for (idx oy = 0; oy < sz(h_out); ++oy) {
        const std::size_t sy = detail::nearest_coord(static_cast<std::size_t>(oy), h_in, h_out);
        for (std::size_t ox = 0; ox < w_out; ++ox)
            dst[static_cast<std::size_t>(oy) * w_out + ox] = src[sy * w_in + detail::nearest_coord(ox, w_in, w_out)];
    }
}

void plane_means(std::span<const double> planes, std::size_t count, std::size_t plane, std::span<double> means) {
#pragma omp parallel for schedule(static)
    for (idx k = 0; k < sz(count); ++k)
        means[static_cast<std::size_t>(k)] = detail::plane_mean(planes, static_cast<std::size_t>(k), plane);
}

void weighted_plane_sum(std::span<const double> planes, std::span<const double> weights, std::size_t plane,
                        bool relu, std::span<double> out) {
#pragma omp parallel for schedule(static)
    for (idx u = 0; u < sz(plane); ++u)
        out[static_cast<std::size_t>(u)] =
            detail::weighted_sum_at(planes, weights, plane, relu, static_cast<std::size_t>(u));
}

}  // namespace winsorcam::kernels::omp

namespace winsorcam::kernels {

const char* active_backend() noexcept {
#ifdef WINSORCAM_USE_OPENMP
    return "openmp";
#else
    return "serial";
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace winsorcam::kernels
