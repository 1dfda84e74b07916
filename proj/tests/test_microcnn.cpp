#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "winsorcam/gradcam.hpp"
#include "winsorcam/microcnn.hpp"
#include "winsorcam/rng.hpp"

using namespace winsorcam;

namespace {

Architecture small_arch() {
    Architecture a;
    a.input = {2, 8, 8};
    a.convs = {{4, false}, {5, true}, {3, false}};
    a.num_classes = 3;
    return a;
}

Tensor random_image(const InputSpec& in, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Tensor x({in.channels, in.height, in.width});
    for (double& v : x.values()) v = rng.uniform();
    return x;
}

}  // namespace

TEST(MicroCnn, RandomIsDeterministicAndBiasesAreZero) {
    const auto a = MicroCnn::random(small_arch(), 42);
    const auto b = MicroCnn::random(small_arch(), 42);
    const auto c = MicroCnn::random(small_arch(), 43);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const auto& conv : a.convs())
        for (double v : conv.bias) EXPECT_EQ(v, 0.0);
    for (double v : a.dense().bias) EXPECT_EQ(v, 0.0);
    const double bound = 1.0 / std::sqrt(2.0 * 9.0);
    for (double w : a.convs()[0].weight.values()) EXPECT_LE(std::abs(w), bound);
}

TEST(MicroCnn, ValidatesArchitecture) {
    Architecture one;
    one.convs = {{4, false}};
    EXPECT_THROW(MicroCnn::random(one, 1), std::invalid_argument);

    auto model = MicroCnn::random(small_arch(), 1);
    auto convs = model.convs();
    convs[1].in_channels = 7;
    EXPECT_THROW(MicroCnn(model.input(), convs, model.dense()), std::invalid_argument);

    Architecture tiny;
    tiny.input = {1, 1, 1};
    tiny.convs = {{2, true}, {2, false}};
    EXPECT_THROW(MicroCnn::random(tiny, 1), std::invalid_argument);
}

TEST(MicroCnn, ForwardShapesAndNonNegativeActivations) {
    const auto model = MicroCnn::random(small_arch(), 5);
    const auto trace = model.forward(random_image(model.input(), 6));
    ASSERT_EQ(trace.activations.size(), 3u);
    EXPECT_EQ(trace.activations[0].shape(), (Shape{4, 8, 8}));
    EXPECT_EQ(trace.activations[1].shape(), (Shape{5, 8, 8}));
    EXPECT_EQ(trace.activations[2].shape(), (Shape{3, 4, 4}));
    EXPECT_EQ(trace.logits.shape(), (Shape{3}));
    for (const auto& a : trace.activations) EXPECT_GE(a.min(), 0.0);
    EXPECT_THROW(model.forward(Tensor({1, 8, 8})), std::invalid_argument);
}

TEST(MicroCnn, ZeroDenseWeightsGiveZeroLogits) {
    auto model = MicroCnn::random(small_arch(), 5);
    DenseLayer dense = model.dense();
    dense.weight = Tensor(dense.weight.shape(), 0.0);
    const MicroCnn zeroed(model.input(), model.convs(), dense);
    const auto trace = zeroed.forward(random_image(model.input(), 1));
    for (double v : trace.logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(MicroCnn, LogitsFromActivationReproducesForward) {
    const auto model = MicroCnn::random(small_arch(), 8);
    const auto trace = model.forward(random_image(model.input(), 9));
    for (std::size_t i = 0; i < model.conv_count(); ++i)
        EXPECT_EQ(model.logits_from_activation(i, trace.activations[i]), trace.logits);
}

TEST(MicroCnn, GradientsMatchCentralDifferences) {
    const auto model = MicroCnn::random(small_arch(), 21);
    const auto trace = model.forward(random_image(model.input(), 22));
    const std::size_t cls = 1;
    const auto grads = backward_to_activations(model, trace, cls);
    SplitMix64 rng(23);
    const double h = 1e-5;
    for (std::size_t i = 0; i < model.conv_count(); ++i) {
        const Tensor& a = trace.activations[i];
        for (int s = 0; s < 30; ++s) {
            std::size_t j = rng.below(a.size());
            while (!(a[j] > 0.0)) j = rng.below(a.size());
            Tensor up = a, down = a;
            up[j] += h;
            down[j] -= h;
            const double fd = (model.logits_from_activation(i, up)[cls] - model.logits_from_activation(i, down)[cls]) / (2 * h);
            const double an = grads[i][j];
            EXPECT_LE(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}), 1e-4)
                << "layer " << i << " index " << j;
        }
    }
}

TEST(MicroCnn, FinalLayerGradientIsDenseRowOverPooledSize) {
    const auto model = MicroCnn::random(small_arch(), 31);
    const auto trace = model.forward(random_image(model.input(), 32));
    const auto grads = backward_to_activations(model, trace, 2);
    const Tensor& g = grads.back();
    const double plane = static_cast<double>(g.dim(1) * g.dim(2));
    for (std::size_t k = 0; k < g.dim(0); ++k)
        for (double v : g.channel(k)) EXPECT_EQ(v, model.dense().weight.at(2, k) / plane);
}

TEST(MicroCnn, PreActivationGradientVanishesWhereReluIsInactive) {
    const auto model = MicroCnn::random(small_arch(), 41);
    const auto trace = model.forward(random_image(model.input(), 42));
    const auto grads = model.backward(trace, 0);
    std::size_t inactive = 0;
    for (std::size_t i = 0; i < model.conv_count(); ++i) {
        const Tensor& z = trace.pre_activations[i];
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (!(z[j] > 0.0)) {
                ++inactive;
                EXPECT_EQ(grads.pre_activations[i][j], 0.0);
            } else {
                EXPECT_EQ(grads.pre_activations[i][j], grads.activations[i][j]);
            }
        }
    }
    EXPECT_GT(inactive, 0u);
}

TEST(MicroCnn, BackwardRejectsBadClass) {
    const auto model = MicroCnn::random(small_arch(), 1);
    const auto trace = model.forward(random_image(model.input(), 1));
    EXPECT_THROW(model.backward(trace, 3), std::invalid_argument);
}

TEST(MicroCnn, ArgmaxFirstMaximum) {
    EXPECT_EQ(argmax(Tensor({4}, std::vector<double>{1, 3, 3, 2})), 1u);
    EXPECT_THROW(argmax(Tensor()), std::invalid_argument);
}

TEST(SyntheticFixture, TargetClassWinsAndMaskMatchesSquare) {
    for (std::uint64_t seed : {1u, 7u, 99u}) {
        const auto fx = make_synthetic_fixture(seed);
        EXPECT_EQ(fx.image.shape(), (Shape{1, 16, 16}));
        EXPECT_EQ(fx.mask.shape(), (Shape{16, 16}));
        double fg = 0.0;
        for (double v : fx.mask.values()) {
            EXPECT_TRUE(v == 0.0 || v == 1.0);
            fg += v;
        }
        EXPECT_EQ(fg, 36.0);
        const auto trace = fx.model.forward(fx.image);
        EXPECT_EQ(argmax(trace.logits), fx.target_class);
        EXPECT_EQ(make_synthetic_fixture(seed).image, fx.image);
    }
}
