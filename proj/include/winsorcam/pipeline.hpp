#pragma once

// Bundle -> heatmaps, images and metrics. The CLI and the HTTP service both go
// through these functions, so their outputs agree byte for byte.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "winsorcam/bundle.hpp"
#include "winsorcam/image_io.hpp"
#include "winsorcam/metrics.hpp"
#include "winsorcam/winsorcam.hpp"

namespace winsorcam {

enum class View { fused, overlay, binary };
enum class Method { winsor, final_layer, naive_mean };

std::string_view to_string(View view) noexcept;
View parse_view(std::string_view name);
std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view name);

inline constexpr double kDefaultOverlayAlpha = 0.5;

// A bundle with its p-independent prefix computed: per-layer Grad-CAMs and
// their resampled maps for both kernels. Immutable after construction.
class PreparedBundle {
public:
    PreparedBundle(std::string id, SaliencyBundle bundle);

    const std::string& id() const noexcept { return id_; }
    const SaliencyBundle& bundle() const noexcept { return bundle_; }
    const std::vector<LayerGradCam>& cams() const noexcept { return cams_; }
    const std::vector<Tensor>& resampled(Interp interp) const noexcept;
    std::size_t image_height() const { return bundle_.image.dim(1); }
    std::size_t image_width() const { return bundle_.image.dim(2); }

    WinsorCamResult winsor(const WinsorOptions& options) const;
    Tensor final_layer(Interp interp) const;
    Tensor naive_mean(Interp interp) const;

private:
    std::string id_;
    SaliencyBundle bundle_;
    std::vector<LayerGradCam> cams_;
    std::vector<Tensor> bilinear_;
    std::vector<Tensor> nearest_;
};

// Map at the common layer resolution resampled to the image grid.
Tensor to_image_grid(const PreparedBundle& prepared, const Tensor& common_map, Interp interp);

// "L,H" with L < H.
Bounds parse_bounds(std::string_view text);

Tensor method_map(const PreparedBundle& prepared, Method method, const WinsorOptions& options);

struct Analysis {
    Tensor map;       // common layer resolution
    Tensor saliency;  // `map` on the image grid, un-normalized
    OtsuResult otsu;  // binarization of `saliency`
};

Analysis analyze_map(const PreparedBundle& prepared, Tensor common_map, Interp interp);

std::vector<std::uint8_t> render_view_png(const PreparedBundle& prepared, const Analysis& analysis, View view,
                                          double alpha, Interp interp);

nlohmann::json importance_json(const PreparedBundle& prepared, const WinsorCamResult& result,
                               const WinsorOptions& options);

struct MapMetrics {
    double iou = 0.0;
    double com_distance_px = 0.0;
};

// Resamples `common_map` to the mask grid, binarizes with Otsu for IoU, and
// compares the raw map's centre of mass with the mask's.
MapMetrics evaluate_map(const Tensor& common_map, const Tensor& truth_mask, Interp interp);

}  // namespace winsorcam
