#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "winsorcam/tensor.hpp"
#include "winsorcam/tensor_ops.hpp"

namespace winsorcam {

// H x W tensor holding only 0 and 1.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(std::size_t height, std::size_t width);
    // Nonzero entries become 1.
    static BinaryMask from_tensor(const Tensor& map);

    std::size_t height() const noexcept { return values_.dim(0); }
    std::size_t width() const noexcept { return values_.dim(1); }
    std::size_t count() const noexcept;
    bool get(std::size_t r, std::size_t c) const { return values_.at(r, c) != 0.0; }
    void set(std::size_t r, std::size_t c, bool on) { values_.at(r, c) = on ? 1.0 : 0.0; }
    const Tensor& tensor() const noexcept { return values_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    Tensor values_;
};

inline constexpr std::size_t kOtsuBins = 256;

// Min-max normalized map quantized to bins [0, 255]: floor(v * 256) clamped.
std::array<std::uint64_t, kOtsuBins> otsu_histogram(const Tensor& map);
std::uint8_t otsu_bin(double normalized_value) noexcept;

struct OtsuResult {
    int threshold = 0;  // foreground is bin > threshold
    BinaryMask mask;
};

// Otsu binarization on the 256-bin quantization of the normalized map.
// The threshold maximizing between-class variance wins; ties go to the lowest.
// Variances are compared exactly in integer arithmetic.
OtsuResult otsu_threshold(const Tensor& map);

// TP / (TP + FP + FN). Both masks empty gives 1.
double iou(const BinaryMask& pred, const BinaryMask& truth);

struct CenterOfMass {
    double x = 0.0;  // column
    double y = 0.0;  // row
};

// Intensity centroid of the min-max normalized map. A map that normalizes to
// all zeros yields the geometric centre ((W-1)/2, (H-1)/2).
CenterOfMass center_of_mass(const Tensor& map, double epsilon = kNormalizeEpsilon);

double com_distance(const CenterOfMass& a, const CenterOfMass& b) noexcept;

}  // namespace winsorcam
