#include "winsorcam/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>

#include "winsorcam/bundle.hpp"

namespace winsorcam {

const std::array<Rgb, 256>& colormap_table() noexcept {
    static constexpr std::array<Rgb, 256> table{{
#include "colormap_bgr256.inc"
    }};
    return table;
}

std::uint8_t quantize_unit(double v) noexcept {
    const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(scaled);
}

std::uint8_t colormap_index(double normalized_value) noexcept { return otsu_bin(normalized_value); }

namespace {

void check_image_tensor(const Tensor& image) {
    require_rank(image, 3, "image");
    if (image.dim(0) != 1 && image.dim(0) != 3)
        throw std::invalid_argument("image must have 1 or 3 channels, got " + std::to_string(image.dim(0)));
}

}  // namespace

Image8 render_overlay(const Tensor& image, const Tensor& heatmap, double alpha, Interp interp) {
    check_image_tensor(image);
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("overlay alpha must lie in [0, 1]");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const Tensor norm = minmax_normalize(interpolate(heatmap, H, W, interp));
    const auto& table = colormap_table();

    Image8 out{W, H, 3, std::vector<std::uint8_t>(H * W * 3)};
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
            const Rgb& colour = table[colormap_index(norm.at(r, c))];
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double base = std::clamp(image.at(C == 1 ? 0 : ch, r, c), 0.0, 1.0);
                const double blended = (1.0 - alpha) * base + alpha * (static_cast<double>(colour[ch]) / 255.0);
                out.pixels[(r * W + c) * 3 + ch] = quantize_unit(blended);
            }
        }
    }
    return out;
}

Image8 render_heatmap(const Tensor& heatmap, std::size_t height, std::size_t width, Interp interp) {
    return render_overlay(Tensor({1, height, width}), heatmap, 1.0, interp);
}

Image8 render_mask(const BinaryMask& mask) {
    Image8 out{mask.width(), mask.height(), 1, std::vector<std::uint8_t>(mask.width() * mask.height())};
    for (std::size_t r = 0; r < mask.height(); ++r)
        for (std::size_t c = 0; c < mask.width(); ++c) out.pixels[r * mask.width() + c] = mask.get(r, c) ? 255 : 0;
    return out;
}

namespace {

struct PngError {
    char message[256] = "unknown error";
};

void png_error_jump(png_structp png, png_const_charp msg) {
    auto* err = static_cast<PngError*>(png_get_error_ptr(png));
    std::snprintf(err->message, sizeof(err->message), "%s", msg);
    png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngSource {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

void png_read_from_source(png_structp png, png_bytep data, png_size_t length) {
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (length > src->size - src->pos) png_error(png, "unexpected end of data");
    std::memcpy(data, src->data + src->pos, length);
    src->pos += length;
}

// libpng reports errors by longjmp, so these two functions keep only trivially
// destructible locals between setjmp and the last libpng call.
bool png_encode_rows(const Image8& image, std::vector<std::uint8_t>* out, PngError* err) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_jump, png_warning_ignore);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    const std::size_t stride = image.width * image.channels;
    for (std::size_t r = 0; r < image.height; ++r)
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

bool png_decode_rows(PngSource* src, Image8* image, PngError* err) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_error_jump, png_warning_ignore);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, src, png_read_from_source);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    image->width = png_get_image_width(png, info);
    image->height = png_get_image_height(png, info);
    image->channels = png_get_channels(png, info);
    if (png_get_rowbytes(png, info) != image->width * image->channels) png_error(png, "unexpected row layout");
    image->pixels.resize(image->width * image->height * image->channels);
    const std::size_t stride = image->width * image->channels;
    for (std::size_t r = 0; r < image->height; ++r) png_read_row(png, image->pixels.data() + r * stride, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& image) {
    if (image.width == 0 || image.height == 0) throw std::invalid_argument("encode_png: empty image");
    if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("encode_png: 1 or 3 channels supported");
    if (image.pixels.size() != image.width * image.height * image.channels)
        throw std::invalid_argument("encode_png: pixel buffer size mismatch");
    std::vector<std::uint8_t> out;
    PngError err;
    if (!png_encode_rows(image, &out, &err)) throw std::runtime_error(std::string("png encode: ") + err.message);
    return out;
}

Image8 decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw std::runtime_error("png decode: not a PNG stream");
    PngSource src{bytes.data(), bytes.size(), 0};
    Image8 image;
    PngError err;
    if (!png_decode_rows(&src, &image, &err)) throw std::runtime_error(std::string("png decode: ") + err.message);
    if (image.channels != 1 && image.channels != 3) throw std::runtime_error("png decode: unsupported channel layout");
    return image;
}

void export_png(const Image8& image, const std::filesystem::path& path) { write_file(path, encode_png(image)); }

Image8 import_png(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_png(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Tensor image_to_tensor(const Image8& image) {
    Tensor t({image.channels, image.height, image.width});
    for (std::size_t ch = 0; ch < image.channels; ++ch)
        for (std::size_t r = 0; r < image.height; ++r)
            for (std::size_t c = 0; c < image.width; ++c) t.at(ch, r, c) = static_cast<double>(image.at(r, c, ch)) / 255.0;
    return t;
}

Image8 tensor_to_image(const Tensor& image) {
    check_image_tensor(image);
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    Image8 out{W, H, C, std::vector<std::uint8_t>(C * H * W)};
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
            for (std::size_t ch = 0; ch < C; ++ch) out.pixels[(r * W + c) * C + ch] = quantize_unit(image.at(ch, r, c));
    return out;
}

BinaryMask mask_from_image(const Image8& image) {
    BinaryMask mask(image.height, image.width);
    for (std::size_t r = 0; r < image.height; ++r)
        for (std::size_t c = 0; c < image.width; ++c) mask.set(r, c, image.at(r, c, 0) != 0);
    return mask;
}

}  // namespace winsorcam
