#include "kernel_detail.hpp"
#include "winsorcam/kernels.hpp"

namespace winsorcam::kernels::serial {

void conv3x3_forward(std::span<const double> input, Dims3 in, std::span<const double> weight,
                     std::span<const double> bias, std::size_t out_channels, std::span<double> output) {
    for (std::size_t o = 0; o < out_channels; ++o)
        for (std::size_t y = 0; y < in.height; ++y)
            for (std::size_t x = 0; x < in.width; ++x)
                output[(o * in.height + y) * in.width + x] = detail::conv3x3_at(input, in, weight, bias[o], o, y, x);
}

void conv3x3_backward_input(std::span<const double> grad_output, std::size_t out_channels,
                            std::span<const double> weight, Dims3 in, std::span<double> grad_input) {
    for (std::size_t c = 0; c < in.channels; ++c)
        for (std::size_t y = 0; y < in.height; ++y)
            for (std::size_t x = 0; x < in.width; ++x)
                grad_input[(c * in.height + y) * in.width + x] =
                    detail::conv3x3_grad_input_at(grad_output, out_channels, weight, in, c, y, x);
}

void resize_bilinear(std::span<const double> src, std::size_t h_in, std::size_t w_in, std::span<double> dst,
                     std::size_t h_out, std::size_t w_out) {
    for (std::size_t oy = 0; oy < h_out; ++oy) {
        const auto cy = detail::bilinear_coord(oy, h_in, h_out);
        for (std::size_t ox = 0; ox < w_out; ++ox) {
            const auto cx = detail::bilinear_coord(ox, w_in, w_out);
            dst[oy * w_out + ox] = detail::bilinear_at(src, w_in, cy, cx);
        }
    }
}

void resize_nearest(std::span<const double> src, std::size_t h_in, std::size_t w_in, std::span<double> dst,
                    std::size_t h_out, std::size_t w_out) {
    for (std::size_t oy = 0; oy < h_out; ++oy) {
        const std::size_t sy = detail::nearest_coord(oy, h_in, h_out);
        for (std::size_t ox = 0; ox < w_out; ++ox)
            dst[oy * w_out + ox] = src[sy * w_in + detail::nearest_coord(ox, w_in, w_out)];
    }
}

void plane_means(std::span<const double> planes, std::size_t count, std::size_t plane, std::span<double> means) {
    for (std::size_t k = 0; k < count; ++k) means[k] = detail::plane_mean(planes, k, plane);
}

void weighted_plane_sum(std::span<const double> planes, std::span<const double> weights, std::size_t plane,
                        bool relu, std::span<double> out) {
    for (std::size_t u = 0; u < plane; ++u) out[u] = detail::weighted_sum_at(planes, weights, plane, relu, u);
}

}  // namespace winsorcam::kernels::serial
