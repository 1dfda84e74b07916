#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "winsorcam/metrics.hpp"
#include "winsorcam/rng.hpp"

using namespace winsorcam;

namespace {

BinaryMask mask_of(std::initializer_list<std::initializer_list<double>> rows) {
    return BinaryMask::from_tensor(Tensor::from_rows(rows));
}

}  // namespace

TEST(Iou, Fixtures) {
    const auto a = mask_of({{1, 1, 0}, {0, 0, 0}});
    const auto b = mask_of({{0, 1, 1}, {0, 0, 0}});
    const auto c = mask_of({{0, 0, 0}, {1, 1, 1}});
    EXPECT_EQ(iou(a, a), 1.0);
    EXPECT_EQ(iou(a, c), 0.0);
    EXPECT_EQ(iou(a, b), 1.0 / 3.0);
    EXPECT_EQ(iou(BinaryMask(2, 3), BinaryMask(2, 3)), 1.0);
    EXPECT_THROW(iou(a, BinaryMask(3, 2)), std::invalid_argument);
}

TEST(CenterOfMass, PointMassAndDistance) {
    Tensor m({8, 8}, 0.0);
    m.at(3, 5) = 2.0;  // row 3, column 5
    const auto com = center_of_mass(m);
    EXPECT_EQ(com.x, 5.0);
    EXPECT_EQ(com.y, 3.0);
    EXPECT_EQ(com_distance({0, 0}, {3, 4}), 5.0);
}

TEST(CenterOfMass, ConstantMapGivesGeometricCentre) {
    const auto com = center_of_mass(Tensor({4, 6}, 3.0));
    EXPECT_EQ(com.x, 2.5);
    EXPECT_EQ(com.y, 1.5);
}

TEST(CenterOfMass, TwoPointsWeighted) {
    Tensor m({1, 4}, 0.0);
    m.at(0, 0) = 1.0;
    m.at(0, 3) = 3.0;
    // Normalized weights 1/3 and 1 (up to epsilon): x = 3 / (4/3) = 2.25.
    EXPECT_NEAR(center_of_mass(m, 1e-12).x, 2.25, 1e-9);
}

TEST(Otsu, BimodalMapSplitsCleanly) {
    Tensor m({4, 4}, 0.1);
    for (std::size_t c = 0; c < 4; ++c) m.at(0, c) = m.at(1, c) = 0.9;
    const auto r = otsu_threshold(m);
    for (std::size_t row = 0; row < 4; ++row)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(r.mask.get(row, c), row < 2);
    EXPECT_EQ(r.threshold, 0);
}

TEST(Otsu, ConstantMapGivesEmptyMask) {
    const auto r = otsu_threshold(Tensor({5, 5}, 2.0));
    EXPECT_EQ(r.threshold, 0);
    EXPECT_EQ(r.mask.count(), 0u);
}

TEST(Otsu, HistogramMatchesIndependentBinning) {
    SplitMix64 rng(3);
    Tensor m({9, 11});
    for (double& v : m.values()) v = rng.uniform(-2, 5);
    const auto hist = otsu_histogram(m);
    std::array<std::uint64_t, 256> ref{};
    for (double v : m.values()) ++ref[oracle::otsu_bin(v, m.min(), m.max())];
    EXPECT_EQ(hist, ref);
}

TEST(Otsu, MatchesExhaustiveSearch) {
    SplitMix64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 2 + rng.below(30), w = 2 + rng.below(30);
        Tensor m({h, w});
        const int levels = trial % 3 == 0 ? 4 : 0;
        for (double& v : m.values())
            v = levels ? static_cast<double>(rng.below(levels)) : std::pow(rng.uniform(), 1 + trial % 5);
        const auto r = otsu_threshold(m);
        ASSERT_EQ(r.threshold, oracle::otsu_threshold(otsu_histogram(m))) << "trial " << trial;
    }
}
