#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "winsorcam/gradcam.hpp"
#include "winsorcam/tensor_ops.hpp"

namespace winsorcam {

enum class Aggregation { mean, max };

std::string_view to_string(Aggregation agg) noexcept;
Aggregation parse_aggregation(std::string_view name);

// Where the normalization range [x_min, x_max] comes from. pre_clip takes both
// ends from the positive raw importances; post_clip uses the clipped vector's
// maximum (the threshold T) as x_max.
enum class RangeSource { pre_clip, post_clip };

std::string_view to_string(RangeSource src) noexcept;
RangeSource parse_range_source(std::string_view name);

struct Bounds {
    double lower = 0.1;
    double upper = 1.0;
    friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct WinsorOptions {
    double p = 50.0;
    Aggregation aggregation = Aggregation::mean;
    Interp interp = Interp::bilinear;
    Bounds bounds{};
    RangeSource range_source = RangeSource::pre_clip;
};

// Per-layer importance before and after clipping and rescaling.
//   raw[i]        >= 0
//   winsorized[i] == min(raw[i], threshold) for raw[i] > 0, else 0
//   normalized[i] in {0} U [bounds.lower, bounds.upper]
struct ImportanceVector {
    std::vector<double> raw;
    std::vector<double> winsorized;
    std::vector<double> normalized;
    double threshold = 0.0;
    double p = 0.0;
    Aggregation aggregation = Aggregation::mean;
    Bounds bounds{};
};

struct WinsorCamResult {
    Tensor fused;                       // H x W, >= 0
    std::vector<Tensor> per_layer_maps; // Grad-CAM maps resampled to H x W
    ImportanceVector importance;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::string> warnings;
};

// ReLU(mean_k alpha) or ReLU(max_k alpha) for every layer.
std::vector<double> aggregate_importance(std::span<const LayerGradCam> cams, Aggregation aggregation);

struct Winsorized {
    std::vector<double> clipped;
    double threshold = 0.0;
};

// One-sided upper clipping at the p-th percentile of the positive entries.
// All-zero input yields all zeros and threshold 0.
Winsorized winsorize(std::span<const double> gamma, double p);

// Affine map of positive entries onto [lower, upper]; zeros stay zero. When
// x_min == x_max every positive entry receives `upper`.
std::vector<double> normalize_importance(std::span<const double> clipped, double x_min, double x_max,
                                         Bounds bounds = {});

ImportanceVector compute_importance(std::span<const LayerGradCam> cams, const WinsorOptions& options);

// (max_i H_i, max_i W_i)
std::pair<std::size_t, std::size_t> common_size(std::span<const LayerGradCam> cams);

std::vector<Tensor> resample_layer_maps(std::span<const LayerGradCam> cams, Interp interp);

// sum_i weights[i] * maps[i], accumulated in layer order.
Tensor weighted_map_sum(std::span<const Tensor> maps, std::span<const double> weights);

WinsorCamResult fuse(std::span<const LayerGradCam> cams, const ImportanceVector& importance, Interp interp);

// Steps after the p-independent prefix: importance, clipping, rescaling, fusion.
// `resampled` must be resample_layer_maps(cams, options.interp).
WinsorCamResult winsor_cam_from_maps(std::span<const LayerGradCam> cams, std::vector<Tensor> resampled,
                                     const WinsorOptions& options);

WinsorCamResult winsor_cam(std::span<const LayerGradCam> cams, const WinsorOptions& options);
WinsorCamResult winsor_cam(std::span<const LayerCapture> layers, const WinsorOptions& options);
WinsorCamResult winsor_cam(const MicroCnn& model, const ForwardTrace& trace, std::size_t class_index,
                           const WinsorOptions& options);

// Unweighted mean of the resampled per-layer maps.
Tensor naive_mean_baseline(std::span<const LayerGradCam> cams, Interp interp);

// Grad-CAM of the deepest layer, resampled to the common size.
Tensor final_layer_baseline(std::span<const LayerGradCam> cams, Interp interp);

}  // namespace winsorcam
