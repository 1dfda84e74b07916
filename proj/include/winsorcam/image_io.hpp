#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "winsorcam/metrics.hpp"
#include "winsorcam/tensor.hpp"
#include "winsorcam/tensor_ops.hpp"

namespace winsorcam {

// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct Image8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t r, std::size_t c, std::size_t ch) const { return pixels[(r * width + c) * channels + ch]; }
    friend bool operator==(const Image8&, const Image8&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

// Blue -> green -> red table, 256 entries. Mirrors data/colormap_bgr256.txt.
const std::array<Rgb, 256>& colormap_table() noexcept;

// [0, 1] -> byte, round half away from zero, clamped.
std::uint8_t quantize_unit(double v) noexcept;

// Colormap index of a normalized value: floor(v * 256) clamped to [0, 255].
std::uint8_t colormap_index(double normalized_value) noexcept;

// Overlay(I, Normalize(heatmap)): the heatmap is resampled to the image size,
// min-max normalized, colour-mapped and blended as (1 - alpha) * I + alpha * colour.
// Quantization to 8 bits happens once at the end. Gray images are replicated to RGB.
Image8 render_overlay(const Tensor& image, const Tensor& heatmap, double alpha, Interp interp);

// Colour-mapped normalized heatmap (overlay with alpha = 1).
Image8 render_heatmap(const Tensor& heatmap, std::size_t height, std::size_t width, Interp interp);

// 0 -> 0, 1 -> 255 gray image.
Image8 render_mask(const BinaryMask& mask);

std::vector<std::uint8_t> encode_png(const Image8& image);
Image8 decode_png(std::span<const std::uint8_t> bytes);
void export_png(const Image8& image, const std::filesystem::path& path);
Image8 import_png(const std::filesystem::path& path);

// C x H x W tensor in [0, 1] from an 8-bit image, and back.
Tensor image_to_tensor(const Image8& image);
Image8 tensor_to_image(const Tensor& image);

// Single-channel image where nonzero is foreground. Colour inputs use the first channel.
BinaryMask mask_from_image(const Image8& image);

}  // namespace winsorcam
