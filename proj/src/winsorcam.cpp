#include "winsorcam/winsorcam.hpp"

#include <algorithm>
#include <stdexcept>

#include "winsorcam/kernels.hpp"

namespace winsorcam {

std::string_view to_string(Aggregation agg) noexcept { return agg == Aggregation::mean ? "mean" : "max"; }

Aggregation parse_aggregation(std::string_view name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "max") return Aggregation::max;
    throw std::invalid_argument("unknown aggregation '" + std::string(name) + "' (expected mean|max)");
}

std::string_view to_string(RangeSource src) noexcept {
    return src == RangeSource::pre_clip ? "pre-clip" : "post-clip";
}

RangeSource parse_range_source(std::string_view name) {
    if (name == "pre-clip") return RangeSource::pre_clip;
    if (name == "post-clip") return RangeSource::post_clip;
    throw std::invalid_argument("unknown range source '" + std::string(name) + "' (expected pre-clip|post-clip)");
}

std::vector<double> aggregate_importance(std::span<const LayerGradCam> cams, Aggregation aggregation) {
    if (cams.empty()) throw std::invalid_argument("aggregate_importance: no layers");
    std::vector<double> gamma;
    gamma.reserve(cams.size());
    for (const auto& cam : cams) {
        if (cam.alpha.empty()) throw std::invalid_argument("aggregate_importance: layer without channels");
        double v = 0.0;
        if (aggregation == Aggregation::mean) {
            for (double a : cam.alpha) v += a;
            v /= static_cast<double>(cam.alpha.size());
        } else {
            v = *std::max_element(cam.alpha.begin(), cam.alpha.end());
        }
        gamma.push_back(v > 0.0 ? v : 0.0);
    }
    return gamma;
}

namespace {

void check_p(double p) {
    if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("p must lie in [0, 100], got " + std::to_string(p));
}

std::vector<double> positives(std::span<const double> gamma) {
    std::vector<double> out;
    for (double g : gamma)
        if (g > 0.0) out.push_back(g);
    return out;
}

}  // namespace

Winsorized winsorize(std::span<const double> gamma, double p) {
    check_p(p);
    Winsorized w{std::vector<double>(gamma.size(), 0.0), 0.0};
    const auto pos = positives(gamma);
    if (pos.empty()) return w;
    w.threshold = quantile_linear(pos, p);
    for (std::size_t i = 0; i < gamma.size(); ++i)
        if (gamma[i] > 0.0) w.clipped[i] = std::min(gamma[i], w.threshold);
    return w;
}

std::vector<double> normalize_importance(std::span<const double> clipped, double x_min, double x_max, Bounds bounds) {
    if (!(bounds.lower < bounds.upper)) throw std::invalid_argument("normalize_importance: bounds require L < H");
    if (!(x_min <= x_max)) throw std::invalid_argument("normalize_importance: x_min exceeds x_max");
    std::vector<double> out(clipped.size(), 0.0);
    const double span = x_max - x_min;
    for (std::size_t i = 0; i < clipped.size(); ++i) {
        if (!(clipped[i] > 0.0)) continue;
        if (span == 0.0) {
            out[i] = bounds.upper;
            continue;
        }
        const double v = bounds.lower + (clipped[i] - x_min) / span * (bounds.upper - bounds.lower);
        out[i] = std::clamp(v, bounds.lower, bounds.upper);
    }
    return out;
}

ImportanceVector compute_importance(std::span<const LayerGradCam> cams, const WinsorOptions& options) {
    check_p(options.p);
    ImportanceVector imp;
    imp.p = options.p;
    imp.aggregation = options.aggregation;
    imp.bounds = options.bounds;
    imp.raw = aggregate_importance(cams, options.aggregation);
    auto w = winsorize(imp.raw, options.p);
    imp.winsorized = std::move(w.clipped);
    imp.threshold = w.threshold;

    const auto pos = positives(imp.raw);
    if (pos.empty()) {
        if (!(options.bounds.lower < options.bounds.upper))
            throw std::invalid_argument("normalize_importance: bounds require L < H");
        imp.normalized.assign(imp.raw.size(), 0.0);
        return imp;
    }
    const double x_min = *std::min_element(pos.begin(), pos.end());
    double x_max = *std::max_element(pos.begin(), pos.end());
    if (options.range_source == RangeSource::post_clip) x_max = std::min(x_max, imp.threshold);
    imp.normalized = normalize_importance(imp.winsorized, x_min, x_max, options.bounds);
    return imp;
}

std::pair<std::size_t, std::size_t> common_size(std::span<const LayerGradCam> cams) {
    if (cams.empty()) throw std::invalid_argument("common_size: no layers");
    std::size_t h = 0, w = 0;
    for (const auto& cam : cams) {
        h = std::max(h, cam.map.dim(0));
        w = std::max(w, cam.map.dim(1));
    }
    return {h, w};
}

std::vector<Tensor> resample_layer_maps(std::span<const LayerGradCam> cams, Interp interp) {
    const auto [h, w] = common_size(cams);
    std::vector<Tensor> maps;
    maps.reserve(cams.size());
    for (const auto& cam : cams) maps.push_back(interpolate(cam.map, h, w, interp));
    return maps;
}

Tensor weighted_map_sum(std::span<const Tensor> maps, std::span<const double> weights) {
    if (maps.empty()) throw std::invalid_argument("weighted_map_sum: no maps");
    if (maps.size() != weights.size()) throw std::invalid_argument("weighted_map_sum: weight count mismatch");
    const Shape& shape = maps.front().shape();
    const std::size_t plane = maps.front().size();
    std::vector<double> stacked;
    stacked.reserve(plane * maps.size());
    for (const auto& m : maps) {
        if (m.shape() != shape) throw std::invalid_argument("weighted_map_sum: maps differ in shape");
        stacked.insert(stacked.end(), m.data().begin(), m.data().end());
    }
    Tensor out(shape);
    kernels::weighted_plane_sum(stacked, weights, plane, /*relu=*/false, out.values());
    return out;
}

WinsorCamResult winsor_cam_from_maps(std::span<const LayerGradCam> cams, std::vector<Tensor> resampled,
                                     const WinsorOptions& options) {
    if (resampled.size() != cams.size()) throw std::invalid_argument("winsor_cam: resampled map count mismatch");
    WinsorCamResult result;
    result.importance = compute_importance(cams, options);
    std::tie(result.height, result.width) = common_size(cams);
    result.fused = weighted_map_sum(resampled, result.importance.normalized);
    result.per_layer_maps = std::move(resampled);
    if (std::none_of(result.importance.raw.begin(), result.importance.raw.end(), [](double g) { return g > 0.0; })) {
        result.warnings.emplace_back("no layer has positive importance for this class; fused map is all zeros");
    }
    return result;
}

WinsorCamResult fuse(std::span<const LayerGradCam> cams, const ImportanceVector& importance, Interp interp) {
    if (importance.normalized.size() != cams.size()) {
        throw std::invalid_argument("fuse: " + std::to_string(importance.normalized.size()) + " weights for " +
                                    std::to_string(cams.size()) + " layers");
    }
    WinsorCamResult result;
    result.importance = importance;
    std::tie(result.height, result.width) = common_size(cams);
    result.per_layer_maps = resample_layer_maps(cams, interp);
    result.fused = weighted_map_sum(result.per_layer_maps, importance.normalized);
    return result;
}

WinsorCamResult winsor_cam(std::span<const LayerGradCam> cams, const WinsorOptions& options) {
    check_p(options.p);
    return winsor_cam_from_maps(cams, resample_layer_maps(cams, options.interp), options);
}

WinsorCamResult winsor_cam(std::span<const LayerCapture> layers, const WinsorOptions& options) {
    const auto cams = all_layer_gradcams(layers);
    return winsor_cam(std::span<const LayerGradCam>(cams), options);
}

WinsorCamResult winsor_cam(const MicroCnn& model, const ForwardTrace& trace, std::size_t class_index,
                           const WinsorOptions& options) {
    const auto cams = all_layer_gradcams(model, trace, class_index);
    return winsor_cam(std::span<const LayerGradCam>(cams), options);
}

Tensor naive_mean_baseline(std::span<const LayerGradCam> cams, Interp interp) {
    if (cams.empty()) throw std::invalid_argument("naive_mean_baseline: no layers");
    const auto maps = resample_layer_maps(cams, interp);
    Tensor sum = weighted_map_sum(maps, std::vector<double>(maps.size(), 1.0));
    const double n = static_cast<double>(maps.size());
    for (double& v : sum.values()) v /= n;
    return sum;
}

Tensor final_layer_baseline(std::span<const LayerGradCam> cams, Interp interp) {
    const auto [h, w] = common_size(cams);
    return interpolate(cams.back().map, h, w, interp);
}

}  // namespace winsorcam
