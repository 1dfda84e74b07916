#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "winsorcam/gradcam.hpp"
#include "winsorcam/rng.hpp"
#include "winsorcam/winsorcam.hpp"

using namespace winsorcam;

namespace {

LayerCapture random_capture(SplitMix64& rng, std::size_t c, std::size_t h, std::size_t w, const std::string& name) {
    LayerCapture cap{name, Tensor({c, h, w}), Tensor({c, h, w})};
    for (double& v : cap.activation.values()) v = std::max(0.0, rng.uniform(-0.5, 1.0));
    for (double& v : cap.gradient.values()) v = rng.uniform(-0.2, 1.0);
    return cap;
}

std::vector<LayerCapture> random_layers(std::uint64_t seed) {
    SplitMix64 rng(seed);
    return {random_capture(rng, 3, 8, 8, "a"), random_capture(rng, 4, 8, 8, "b"), random_capture(rng, 5, 4, 4, "c"),
            random_capture(rng, 2, 2, 2, "d")};
}

}  // namespace

TEST(GradCam, HandComputedExample) {
    // Two channels, 2x2. alpha = spatial gradient means.
    const Tensor act({2, 2, 2}, std::vector<double>{1, 2, 3, 4, 4, 0, 0, 1});
    const Tensor grad({2, 2, 2}, std::vector<double>{1, 1, 1, 1, -2, -2, 0, 0});
    const auto cam = layer_gradcam(act, grad, 3);
    EXPECT_EQ(cam.layer_index, 3u);
    ASSERT_EQ(cam.alpha.size(), 2u);
    EXPECT_DOUBLE_EQ(cam.alpha[0], 1.0);
    EXPECT_DOUBLE_EQ(cam.alpha[1], -1.0);
    // 1*A0 - 1*A1 = [-3, 2, 3, 3] -> ReLU
    EXPECT_EQ(cam.map, Tensor::from_rows({{0, 2}, {3, 3}}));
}

TEST(GradCam, ShapeMismatchThrows) {
    EXPECT_THROW(layer_gradcam(Tensor({2, 3, 3}), Tensor({2, 3, 4})), std::invalid_argument);
    EXPECT_THROW(layer_gradcam(Tensor({3, 3}), Tensor({3, 3})), std::invalid_argument);
}

TEST(GradCam, NegativeGradientsGiveZeroMap) {
    const Tensor act({1, 3, 3}, 1.0);
    const Tensor grad({1, 3, 3}, -1.0);
    const auto cam = layer_gradcam(act, grad);
    for (double v : cam.map.values()) {
        EXPECT_EQ(v, 0.0);
        EXPECT_FALSE(std::signbit(v));
    }
}

TEST(Winsorize, Examples) {
    const std::vector<double> gamma{0, 0.2, 0.5, 1.0, 9.0};
    const auto w = winsorize(gamma, 50);
    EXPECT_DOUBLE_EQ(w.threshold, 0.75);
    EXPECT_EQ(w.clipped, (std::vector<double>{0, 0.2, 0.5, 0.75, 0.75}));
    const auto full = winsorize(gamma, 100);
    EXPECT_EQ(full.threshold, 9.0);
    EXPECT_EQ(full.clipped, gamma);
    const auto zeros = winsorize(std::vector<double>{0, 0, 0}, 30);
    EXPECT_EQ(zeros.threshold, 0.0);
    EXPECT_EQ(zeros.clipped, (std::vector<double>{0, 0, 0}));
    EXPECT_THROW(winsorize(gamma, 101), std::invalid_argument);
}

TEST(NormalizeImportance, Example) {
    const std::vector<double> clipped{0, 0.2, 0.5, 0.75, 0.75};
    const auto n = normalize_importance(clipped, 0.2, 9.0);
    ASSERT_EQ(n.size(), 5u);
    EXPECT_EQ(n[0], 0.0);
    EXPECT_NEAR(n[1], 0.1, 1e-15);
    EXPECT_NEAR(n[2], 0.1 + 0.3 / 8.8 * 0.9, 1e-15);
    EXPECT_NEAR(n[3], 0.1 + 0.55 / 8.8 * 0.9, 1e-15);
    EXPECT_NEAR(n[2], 0.1307, 1e-4);
    EXPECT_NEAR(n[3], 0.1562, 1e-4);
    EXPECT_EQ(n[3], n[4]);
}

TEST(NormalizeImportance, DegenerateRangeGivesUpper) {
    const auto n = normalize_importance(std::vector<double>{0, 2, 2}, 2, 2, {0.1, 1.0});
    EXPECT_EQ(n, (std::vector<double>{0, 1.0, 1.0}));
    EXPECT_THROW(normalize_importance(std::vector<double>{1}, 1, 1, {1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(normalize_importance(std::vector<double>{1}, 2, 1), std::invalid_argument);
}

TEST(Importance, AggregationMeanAndMaxWithRelu) {
    std::vector<LayerGradCam> cams(3);
    cams[0].alpha = {1, 2, 3};
    cams[1].alpha = {-1, -2, 0.5};
    cams[2].alpha = {-1, -1};
    EXPECT_EQ(aggregate_importance(cams, Aggregation::mean), (std::vector<double>{2, 0, 0}));
    EXPECT_EQ(aggregate_importance(cams, Aggregation::max), (std::vector<double>{3, 0.5, 0}));
}

TEST(Importance, PostClipRangeSourceUsesThreshold) {
    std::vector<LayerGradCam> cams(4);
    cams[0].alpha = {0.2};
    cams[1].alpha = {0.5};
    cams[2].alpha = {1.0};
    cams[3].alpha = {9.0};
    WinsorOptions o;
    o.p = 50;
    const auto pre = compute_importance(cams, o);
    EXPECT_NEAR(pre.normalized[2], 0.1 + 0.55 / 8.8 * 0.9, 1e-15);
    o.range_source = RangeSource::post_clip;
    const auto post = compute_importance(cams, o);
    EXPECT_EQ(post.normalized[0], 0.1);
    EXPECT_EQ(post.normalized[2], 1.0);
    EXPECT_EQ(post.normalized[3], 1.0);
    EXPECT_EQ(parse_range_source("post-clip"), RangeSource::post_clip);
    EXPECT_THROW(parse_range_source("clip"), std::invalid_argument);
}

TEST(Importance, InvariantsOnRandomLayers) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto layers = random_layers(seed);
        const auto cams = all_layer_gradcams(layers);
        for (Aggregation agg : {Aggregation::mean, Aggregation::max}) {
            double prev_t = -1;
            for (int p = 0; p <= 100; p += 5) {
                WinsorOptions o;
                o.p = p;
                o.aggregation = agg;
                const auto imp = compute_importance(cams, o);
                ASSERT_EQ(imp.raw.size(), 4u);
                EXPECT_GE(imp.threshold, prev_t);
                prev_t = imp.threshold;
                for (std::size_t i = 0; i < 4; ++i) {
                    EXPECT_GE(imp.raw[i], 0.0);
                    if (imp.raw[i] > 0) {
                        EXPECT_EQ(imp.winsorized[i], std::min(imp.raw[i], imp.threshold));
                        EXPECT_GE(imp.normalized[i], 0.1);
                        EXPECT_LE(imp.normalized[i], 1.0);
                    } else {
                        EXPECT_EQ(imp.winsorized[i], 0.0);
                        EXPECT_EQ(imp.normalized[i], 0.0);
                    }
                }
            }
        }
    }
}

TEST(Fusion, CommonSizeAndWeightedSum) {
    const auto cams = all_layer_gradcams(random_layers(3));
    EXPECT_EQ(common_size(cams), (std::pair<std::size_t, std::size_t>{8, 8}));
    WinsorOptions o;
    const auto r = winsor_cam(std::span<const LayerGradCam>(cams), o);
    ASSERT_EQ(r.per_layer_maps.size(), 4u);
    EXPECT_EQ(r.fused.shape(), (Shape{8, 8}));
    for (std::size_t u = 0; u < r.fused.size(); ++u) {
        double ref = 0.0;
        for (std::size_t i = 0; i < 4; ++i) ref += r.importance.normalized[i] * r.per_layer_maps[i][u];
        EXPECT_NEAR(r.fused[u], ref, 1e-12);
        EXPECT_GE(r.fused[u], 0.0);
    }
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Fusion, AllZeroImportanceWarns) {
    SplitMix64 rng(5);
    auto layers = random_layers(5);
    for (auto& l : layers)
        for (double& g : l.gradient.values()) g = -std::abs(g) - 0.01;
    const auto r = winsor_cam(std::span<const LayerCapture>(layers), WinsorOptions{});
    EXPECT_EQ(r.fused.max(), 0.0);
    EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Fusion, FuseRejectsWeightCountMismatch) {
    const auto cams = all_layer_gradcams(random_layers(4));
    ImportanceVector imp;
    imp.normalized = {1, 1};
    EXPECT_THROW(fuse(cams, imp, Interp::bilinear), std::invalid_argument);
}

TEST(Baselines, NaiveMeanAndFinalLayer) {
    const auto cams = all_layer_gradcams(random_layers(6));
    const Tensor mean = naive_mean_baseline(cams, Interp::nearest);
    const auto maps = resample_layer_maps(cams, Interp::nearest);
    for (std::size_t u = 0; u < mean.size(); ++u) {
        double s = 0;
        for (const auto& m : maps) s += m[u];
        EXPECT_NEAR(mean[u], s / 4.0, 1e-12);
    }
    EXPECT_EQ(final_layer_baseline(cams, Interp::nearest), maps.back());
}

TEST(Baselines, PostClipAtZeroMatchesUniformWeights) {
    // At p = 0 the post-clip reading maps every positive layer to H.
    const auto cams = all_layer_gradcams(random_layers(7));
    WinsorOptions o;
    o.p = 0;
    o.aggregation = Aggregation::max;
    o.range_source = RangeSource::post_clip;
    const auto imp = compute_importance(cams, o);
    for (std::size_t i = 0; i < imp.raw.size(); ++i)
        if (imp.raw[i] > 0) EXPECT_EQ(imp.normalized[i], 1.0);
}
