#include "winsorcam/metrics.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <stdexcept>

namespace winsorcam {

BinaryMask::BinaryMask(std::size_t height, std::size_t width) : values_({height, width}) {}

BinaryMask BinaryMask::from_tensor(const Tensor& map) {
    require_rank(map, 2, "BinaryMask");
    BinaryMask m(map.dim(0), map.dim(1));
    for (std::size_t i = 0; i < map.size(); ++i) m.values_[i] = map[i] != 0.0 ? 1.0 : 0.0;
    return m;
}

std::size_t BinaryMask::count() const noexcept {
    std::size_t n = 0;
    for (double v : values_.values()) n += v != 0.0;
    return n;
}

std::uint8_t otsu_bin(double normalized_value) noexcept {
    const double scaled = std::floor(normalized_value * static_cast<double>(kOtsuBins));
    if (!(scaled > 0.0)) return 0;
    if (scaled >= static_cast<double>(kOtsuBins - 1)) return kOtsuBins - 1;
    return static_cast<std::uint8_t>(scaled);
}

std::array<std::uint64_t, kOtsuBins> otsu_histogram(const Tensor& map) {
    const Tensor normalized = minmax_normalize(map);
    std::array<std::uint64_t, kOtsuBins> hist{};
    for (double v : normalized.values()) ++hist[otsu_bin(v)];
    return hist;
}

OtsuResult otsu_threshold(const Tensor& map) {
    require_rank(map, 2, "otsu_threshold");
    using boost::multiprecision::int256_t;

    const Tensor normalized = minmax_normalize(map);
    std::array<std::uint64_t, kOtsuBins> hist{};
    for (double v : normalized.values()) ++hist[otsu_bin(v)];

    std::int64_t total = 0, total_sum = 0;
    for (std::size_t b = 0; b < kOtsuBins; ++b) {
        total += static_cast<std::int64_t>(hist[b]);
        total_sum += static_cast<std::int64_t>(b * hist[b]);
    }

    // sigma_B^2 * N^2 = (S0 * N - S * n0)^2 / (n0 * n1), compared exactly by
    // cross-multiplication.
    int best = 0;
    int256_t best_num = 0, best_den = 1;
    std::int64_t n0 = 0, s0 = 0;
    for (std::size_t t = 0; t < kOtsuBins; ++t) {
        n0 += static_cast<std::int64_t>(hist[t]);
        s0 += static_cast<std::int64_t>(t * hist[t]);
        const std::int64_t n1 = total - n0;
        if (n0 == 0 || n1 == 0) continue;
        const int256_t diff = int256_t(s0) * total - int256_t(total_sum) * n0;
        const int256_t num = diff * diff;
        const int256_t den = int256_t(n0) * n1;
        if (num * best_den > best_num * den) {
            best = static_cast<int>(t);
            best_num = num;
            best_den = den;
        }
    }

    OtsuResult result{best, BinaryMask(map.dim(0), map.dim(1))};
    for (std::size_t r = 0; r < map.dim(0); ++r)
        for (std::size_t c = 0; c < map.dim(1); ++c)
            result.mask.set(r, c, otsu_bin(normalized.at(r, c)) > best);
    return result;
}

double iou(const BinaryMask& pred, const BinaryMask& truth) {
    if (pred.height() != truth.height() || pred.width() != truth.width()) {
        throw std::invalid_argument("iou: mask shapes differ (" + std::to_string(pred.height()) + "x" +
                                    std::to_string(pred.width()) + " vs " + std::to_string(truth.height()) + "x" +
                                    std::to_string(truth.width()) + ")");
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    const auto p = pred.tensor().values();
    const auto t = truth.tensor().values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool a = p[i] != 0.0, b = t[i] != 0.0;
        tp += a && b;
        fp += a && !b;
        fn += !a && b;
    }
    const std::size_t uni = tp + fp + fn;
    if (uni == 0) return 1.0;
    return static_cast<double>(tp) / static_cast<double>(uni);
}

CenterOfMass center_of_mass(const Tensor& map, double epsilon) {
    require_rank(map, 2, "center_of_mass");
    const Tensor norm = minmax_normalize(map, epsilon);
    double total = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t r = 0; r < norm.dim(0); ++r) {
        for (std::size_t c = 0; c < norm.dim(1); ++c) {
            const double v = norm.at(r, c);
            total += v;
            sx += static_cast<double>(c) * v;
            sy += static_cast<double>(r) * v;
        }
    }
    if (!(total > 0.0)) {
        return {(static_cast<double>(norm.dim(1)) - 1.0) / 2.0, (static_cast<double>(norm.dim(0)) - 1.0) / 2.0};
    }
    return {sx / total, sy / total};
}

double com_distance(const CenterOfMass& a, const CenterOfMass& b) noexcept {
    return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace winsorcam
