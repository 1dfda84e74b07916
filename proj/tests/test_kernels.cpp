#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "winsorcam/kernels.hpp"
#include "winsorcam/rng.hpp"

using namespace winsorcam;
using namespace winsorcam::kernels;

namespace {

std::vector<double> random_vector(SplitMix64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Kernels, BackendReported) {
    EXPECT_NE(std::string(active_backend()), "");
    EXPECT_GE(max_threads(), 1);
}

TEST(Kernels, ConvForwardSerialEqualsParallelBitwise) {
    SplitMix64 rng(1);
    const Dims3 in{3, 13, 17};
    const std::size_t oc = 5;
    const auto x = random_vector(rng, in.volume());
    const auto w = random_vector(rng, oc * in.channels * 9);
    const auto b = random_vector(rng, oc);
    std::vector<double> s(oc * in.plane()), p(oc * in.plane());
    serial::conv3x3_forward(x, in, w, b, oc, s);
    omp::conv3x3_forward(x, in, w, b, oc, p);
    EXPECT_TRUE(bit_equal(s, p));
}

TEST(Kernels, ConvForwardMatchesDirectSum) {
    SplitMix64 rng(2);
    const Dims3 in{2, 4, 5};
    const std::size_t oc = 2;
    const auto x = random_vector(rng, in.volume());
    const auto w = random_vector(rng, oc * in.channels * 9);
    const auto b = random_vector(rng, oc);
    std::vector<double> out(oc * in.plane());
    serial::conv3x3_forward(x, in, w, b, oc, out);
    for (std::size_t o = 0; o < oc; ++o) {
        for (std::size_t r = 0; r < in.height; ++r) {
            for (std::size_t c = 0; c < in.width; ++c) {
                double ref = b[o];
                for (std::size_t k = 0; k < in.channels; ++k)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const long rr = static_cast<long>(r) + dy, cc = static_cast<long>(c) + dx;
                            if (rr < 0 || cc < 0 || rr >= static_cast<long>(in.height) || cc >= static_cast<long>(in.width))
                                continue;
                            ref += w[((o * in.channels + k) * 3 + (dy + 1)) * 3 + (dx + 1)] *
                                   x[(k * in.height + rr) * in.width + cc];
                        }
                EXPECT_NEAR(out[(o * in.height + r) * in.width + c], ref, 1e-12);
            }
        }
    }
}

TEST(Kernels, ConvBackwardIsAdjointOfForward) {
    // <conv(x) - bias, g> == <x, conv_backward(g)>
    SplitMix64 rng(3);
    const Dims3 in{3, 6, 7};
    const std::size_t oc = 4;
    const auto x = random_vector(rng, in.volume());
    const auto w = random_vector(rng, oc * in.channels * 9);
    const std::vector<double> zero_bias(oc, 0.0);
    const auto g = random_vector(rng, oc * in.plane());
    std::vector<double> y(oc * in.plane()), gx(in.volume());
    serial::conv3x3_forward(x, in, w, zero_bias, oc, y);
    serial::conv3x3_backward_input(g, oc, w, in, gx);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * g[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * gx[i];
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Kernels, ConvBackwardSerialEqualsParallelBitwise) {
    SplitMix64 rng(4);
    const Dims3 in{4, 11, 9};
    const std::size_t oc = 3;
    const auto w = random_vector(rng, oc * in.channels * 9);
    const auto g = random_vector(rng, oc * in.plane());
    std::vector<double> s(in.volume()), p(in.volume());
    serial::conv3x3_backward_input(g, oc, w, in, s);
    omp::conv3x3_backward_input(g, oc, w, in, p);
    EXPECT_TRUE(bit_equal(s, p));
}

TEST(Kernels, ResizeSerialEqualsParallelBitwise) {
    SplitMix64 rng(5);
    const auto src = random_vector(rng, 7 * 5);
    for (auto [oh, ow] : {std::pair{7, 5}, {16, 16}, {3, 2}, {64, 33}}) {
        std::vector<double> s(oh * ow), p(oh * ow);
        serial::resize_bilinear(src, 7, 5, s, oh, ow);
        omp::resize_bilinear(src, 7, 5, p, oh, ow);
        EXPECT_TRUE(bit_equal(s, p));
        serial::resize_nearest(src, 7, 5, s, oh, ow);
        omp::resize_nearest(src, 7, 5, p, oh, ow);
        EXPECT_TRUE(bit_equal(s, p));
    }
}

TEST(Kernels, PlaneReductionsSerialEqualsParallelBitwise) {
    SplitMix64 rng(6);
    const std::size_t count = 9, plane = 37 * 23;
    const auto planes = random_vector(rng, count * plane);
    const auto weights = random_vector(rng, count);
    std::vector<double> ms(count), mp(count);
    serial::plane_means(planes, count, plane, ms);
    omp::plane_means(planes, count, plane, mp);
    EXPECT_TRUE(bit_equal(ms, mp));
    for (bool relu : {false, true}) {
        std::vector<double> s(plane), p(plane);
        serial::weighted_plane_sum(planes, weights, plane, relu, s);
        omp::weighted_plane_sum(planes, weights, plane, relu, p);
        EXPECT_TRUE(bit_equal(s, p));
        if (relu)
            for (double v : s) EXPECT_FALSE(std::signbit(v));
    }
}
