#pragma once

// Data-parallel inner loops of the pipeline.
//
// Two implementations share one signature set:
//   kernels::serial  plain loops, the reference the tests trust
//   kernels::omp     OpenMP over output elements
// Each output element is produced by one thread with the same summation order
// as the serial loop, so both back ends are bit-identical. The unqualified
// kernels:: functions dispatch to omp when built with OpenMP.

#include <cstddef>
#include <span>

namespace winsorcam::kernels {

struct Dims3 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t plane() const noexcept { return height * width; }
    std::size_t volume() const noexcept { return channels * height * width; }
};

#define WINSORCAM_KERNEL_DECLS                                                                    \
    /* 3x3 convolution, stride 1, zero padding 1. weight is out x in x 3 x 3. */                  \
    void conv3x3_forward(std::span<const double> input, Dims3 in, std::span<const double> weight, \
                         std::span<const double> bias, std::size_t out_channels,                  \
                         std::span<double> output);                                               \
    /* Gradient of conv3x3_forward w.r.t. its input, given the output gradient. */                \
    void conv3x3_backward_input(std::span<const double> grad_output, std::size_t out_channels,    \
                                std::span<const double> weight, Dims3 in,                         \
                                std::span<double> grad_input);                                    \
    void resize_bilinear(std::span<const double> src, std::size_t h_in, std::size_t w_in,         \
                         std::span<double> dst, std::size_t h_out, std::size_t w_out);            \
    void resize_nearest(std::span<const double> src, std::size_t h_in, std::size_t w_in,          \
                        std::span<double> dst, std::size_t h_out, std::size_t w_out);             \
    /* means[k] = mean of plane k, summed in index order. */                                      \
    void plane_means(std::span<const double> planes, std::size_t count, std::size_t plane,        \
                     std::span<double> means);                                                    \
    /* out(u) = sum_k weights[k] * planes[k](u), k ascending; clamped at 0 when relu is set. */   \
    void weighted_plane_sum(std::span<const double> planes, std::span<const double> weights,      \
                            std::size_t plane, bool relu, std::span<double> out);

namespace serial {
WINSORCAM_KERNEL_DECLS
}

namespace omp {
WINSORCAM_KERNEL_DECLS
}

#undef WINSORCAM_KERNEL_DECLS

#ifdef WINSORCAM_USE_OPENMP
using namespace omp;
#else
using namespace serial;
#endif

// Name of the back end the unqualified calls resolve to.
const char* active_backend() noexcept;
int max_threads() noexcept;

}  // namespace winsorcam::kernels
