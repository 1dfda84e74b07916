#include "winsorcam/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace winsorcam {

using nlohmann::json;

std::string_view to_string(View view) noexcept {
    switch (view) {
        case View::fused: return "fused";
        case View::overlay: return "overlay";
        case View::binary: return "binary";
    }
    return "fused";
}

View parse_view(std::string_view name) {
    if (name == "fused") return View::fused;
    if (name == "overlay") return View::overlay;
    if (name == "binary") return View::binary;
    throw std::invalid_argument("unknown view '" + std::string(name) + "' (expected fused|overlay|binary)");
}

std::string_view to_string(Method method) noexcept {
    switch (method) {
        case Method::winsor: return "winsor";
        case Method::final_layer: return "final_layer";
        case Method::naive_mean: return "naive_mean";
    }
    return "winsor";
}

Method parse_method(std::string_view name) {
    if (name == "winsor") return Method::winsor;
    if (name == "final_layer") return Method::final_layer;
    if (name == "naive_mean") return Method::naive_mean;
    throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected winsor|final_layer|naive_mean)");
}

Bounds parse_bounds(std::string_view text) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw std::invalid_argument("bounds must be given as L,H");
    auto number = [&](std::string_view part) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc() || ptr != part.data() + part.size() || !std::isfinite(v))
            throw std::invalid_argument("bounds: '" + std::string(part) + "' is not a number");
        return v;
    };
    const Bounds b{number(text.substr(0, comma)), number(text.substr(comma + 1))};
    if (!(b.lower < b.upper)) throw std::invalid_argument("bounds require L < H");
    return b;
}

PreparedBundle::PreparedBundle(std::string id, SaliencyBundle bundle)
    : id_(std::move(id)), bundle_(std::move(bundle)), cams_(all_layer_gradcams(bundle_.layers)) {
    bilinear_ = resample_layer_maps(cams_, Interp::bilinear);
    nearest_ = resample_layer_maps(cams_, Interp::nearest);
}

const std::vector<Tensor>& PreparedBundle::resampled(Interp interp) const noexcept {
    return interp == Interp::bilinear ? bilinear_ : nearest_;
}

WinsorCamResult PreparedBundle::winsor(const WinsorOptions& options) const {
    return winsor_cam_from_maps(cams_, resampled(options.interp), options);
}

Tensor PreparedBundle::final_layer(Interp interp) const { return resampled(interp).back(); }

Tensor PreparedBundle::naive_mean(Interp interp) const {
    const auto& maps = resampled(interp);
    Tensor sum = weighted_map_sum(maps, std::vector<double>(maps.size(), 1.0));
    const double n = static_cast<double>(maps.size());
    for (double& v : sum.values()) v /= n;
    return sum;
}

Tensor to_image_grid(const PreparedBundle& prepared, const Tensor& common_map, Interp interp) {
    return interpolate(common_map, prepared.image_height(), prepared.image_width(), interp);
}

Tensor method_map(const PreparedBundle& prepared, Method method, const WinsorOptions& options) {
    switch (method) {
        case Method::winsor: return prepared.winsor(options).fused;
        case Method::final_layer: return prepared.final_layer(options.interp);
        case Method::naive_mean: return prepared.naive_mean(options.interp);
    }
    throw std::invalid_argument("method_map: unknown method");
}

Analysis analyze_map(const PreparedBundle& prepared, Tensor common_map, Interp interp) {
    Analysis a;
    a.saliency = to_image_grid(prepared, common_map, interp);
    a.map = std::move(common_map);
    a.otsu = otsu_threshold(a.saliency);
    return a;
}

std::vector<std::uint8_t> render_view_png(const PreparedBundle& prepared, const Analysis& analysis, View view,
                                          double alpha, Interp interp) {
    switch (view) {
        case View::fused:
            return encode_png(render_heatmap(analysis.map, prepared.image_height(), prepared.image_width(), interp));
        case View::overlay:
            return encode_png(render_overlay(prepared.bundle().image, analysis.map, alpha, interp));
        case View::binary:
            return encode_png(render_mask(analysis.otsu.mask));
    }
    throw std::invalid_argument("render_view_png: unknown view");
}

json importance_json(const PreparedBundle& prepared, const WinsorCamResult& result, const WinsorOptions& options) {
    json layers = json::array();
    for (const auto& layer : prepared.bundle().layers) layers.push_back(layer.name);
    const auto& imp = result.importance;
    return {{"bundle", prepared.id()},
            {"class_index", prepared.bundle().class_index},
            {"layers", std::move(layers)},
            {"p", imp.p},
            {"aggregation", to_string(imp.aggregation)},
            {"interp", to_string(options.interp)},
            {"bounds", {imp.bounds.lower, imp.bounds.upper}},
            {"range_source", to_string(options.range_source)},
            {"raw", imp.raw},
            {"winsorized", imp.winsorized},
            {"normalized", imp.normalized},
            {"threshold", imp.threshold},
            {"common_size", {result.height, result.width}},
            {"warnings", result.warnings}};
}

MapMetrics evaluate_map(const Tensor& common_map, const Tensor& truth_mask, Interp interp) {
    require_rank(truth_mask, 2, "evaluate_map mask");
    const Tensor saliency = interpolate(common_map, truth_mask.dim(0), truth_mask.dim(1), interp);
    const OtsuResult otsu = otsu_threshold(saliency);
    MapMetrics m;
    m.iou = iou(otsu.mask, BinaryMask::from_tensor(truth_mask));
    m.com_distance_px = com_distance(center_of_mass(saliency), center_of_mass(truth_mask));
    return m;
}

}  // namespace winsorcam
