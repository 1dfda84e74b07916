// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "winsorcam/kernels.hpp"
#include "winsorcam/rng.hpp"

using namespace winsorcam;
using namespace winsorcam::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <auto Conv>
void BM_Conv3x3(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const Dims3 in{16, side, side};
    const std::size_t oc = 16;
    const auto x = random_vector(in.volume(), 1);
    const auto w = random_vector(oc * in.channels * 9, 2);
    const std::vector<double> b(oc, 0.0);
    std::vector<double> y(oc * in.plane());
    for (auto _ : state) {
        Conv(x, in, w, b, oc, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size()));
}

template <auto Resize>
void BM_ResizeBilinear(benchmark::State& state) {
    const auto out = static_cast<std::size_t>(state.range(0));
    const auto src = random_vector(32 * 32, 3);
    std::vector<double> dst(out * out);
    for (auto _ : state) {
        Resize(src, 32, 32, dst, out, out);
        benchmark::DoNotOptimize(dst.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(dst.size()));
}

template <auto Sum>
void BM_WeightedPlaneSum(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const std::size_t count = 20, plane = side * side;
    const auto planes = random_vector(count * plane, 4);
    const auto weights = random_vector(count, 5);
    std::vector<double> out(plane);
    for (auto _ : state) {
        Sum(planes, weights, plane, true, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(plane));
}

}  // namespace

BENCHMARK(BM_Conv3x3<serial::conv3x3_forward>)->Name("conv3x3/serial")->Arg(32)->Arg(128);
BENCHMARK(BM_Conv3x3<omp::conv3x3_forward>)->Name("conv3x3/omp")->Arg(32)->Arg(128);
BENCHMARK(BM_ResizeBilinear<serial::resize_bilinear>)->Name("resize_bilinear/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_ResizeBilinear<omp::resize_bilinear>)->Name("resize_bilinear/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_WeightedPlaneSum<serial::weighted_plane_sum>)->Name("weighted_plane_sum/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_WeightedPlaneSum<omp::weighted_plane_sum>)->Name("weighted_plane_sum/omp")->Arg(128)->Arg(512);

BENCHMARK_MAIN();
