#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "winsorcam/image_io.hpp"
#include "winsorcam/rng.hpp"

using namespace winsorcam;
namespace fs = std::filesystem;

TEST(Colormap, TableMatchesShippedTextFile) {
    std::ifstream in(fs::path(WINSORCAM_DATA_DIR) / "colormap_bgr256.txt");
    ASSERT_TRUE(in) << "colormap text file missing";
    std::string line;
    std::size_t index = 0;
    const auto& table = colormap_table();
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int r = -1, g = -1, b = -1;
        ss >> r >> g >> b;
        ASSERT_LT(index, 256u);
        EXPECT_EQ(table[index], (Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)}))
            << "index " << index;
        ++index;
    }
    EXPECT_EQ(index, 256u);
    EXPECT_EQ(table.front(), (Rgb{0, 0, 255}));
    EXPECT_EQ(table.back(), (Rgb{255, 0, 0}));
}

TEST(Quantize, RoundsAndClamps) {
    EXPECT_EQ(quantize_unit(0.0), 0);
    EXPECT_EQ(quantize_unit(1.0), 255);
    EXPECT_EQ(quantize_unit(-3.0), 0);
    EXPECT_EQ(quantize_unit(7.0), 255);
    EXPECT_EQ(quantize_unit(0.5), 128);
    EXPECT_EQ(colormap_index(0.0), 0);
    EXPECT_EQ(colormap_index(0.999999), 255);
    EXPECT_EQ(colormap_index(1.0), 255);
}

TEST(Overlay, AlphaZeroIsIdentityOnImage) {
    SplitMix64 rng(1);
    Tensor img({3, 5, 4});
    for (double& v : img.values()) v = std::round(rng.uniform() * 255.0) / 255.0;
    Tensor heat({2, 2});
    for (double& v : heat.values()) v = rng.uniform();
    const Image8 out = render_overlay(img, heat, 0.0, Interp::bilinear);
    EXPECT_EQ(out, tensor_to_image(img));
}

TEST(Overlay, AlphaOneConstantHeatmapIsLowestColour) {
    const Tensor img({1, 3, 3}, 0.7);
    const Image8 out = render_overlay(img, Tensor({3, 3}, 0.0), 1.0, Interp::nearest);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(out.pixels[i * 3 + ch], colormap_table()[0][ch]);
}

TEST(Overlay, TwoByTwoBlendMatchesScalarOracle) {
    const Tensor img({1, 2, 2}, std::vector<double>{0.0, 0.25, 0.5, 1.0});
    const Tensor heat = Tensor::from_rows({{0.0, 1.0}, {2.0, 4.0}});
    const Image8 out = render_overlay(img, heat, 0.5, Interp::bilinear);
    const double lo = 0.0, hi = 4.0;
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            const double norm = (heat.at(r, c) - lo) / (hi - lo + 1e-6);
            const int idx = std::min(255, static_cast<int>(std::floor(norm * 256)));
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double v = 0.5 * img.at(0, r, c) + 0.5 * colormap_table()[idx][ch] / 255.0;
                EXPECT_EQ(out.at(r, c, ch), static_cast<int>(std::lround(v * 255.0))) << r << "," << c << "," << ch;
            }
        }
    }
}

TEST(Overlay, RejectsAlphaOutOfRange) {
    EXPECT_THROW(render_overlay(Tensor({1, 2, 2}), Tensor({2, 2}), 1.5, Interp::bilinear), std::invalid_argument);
    EXPECT_THROW(render_overlay(Tensor({1, 2, 2}), Tensor({2, 2}), -0.1, Interp::bilinear), std::invalid_argument);
}

TEST(Png, RoundTripAndDeterminism) {
    SplitMix64 rng(2);
    for (std::size_t channels : {1u, 3u}) {
        Image8 img{7, 5, channels, std::vector<std::uint8_t>(7 * 5 * channels)};
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
        const auto a = encode_png(img);
        const auto b = encode_png(img);
        EXPECT_EQ(a, b);
        EXPECT_EQ(decode_png(a), img);
    }
}

TEST(Png, OneByOneAndFiles) {
    const Image8 img{1, 1, 3, {10, 20, 30}};
    const fs::path path = fs::temp_directory_path() / "winsorcam_test_1x1.png";
    export_png(img, path);
    EXPECT_EQ(import_png(path), img);
    fs::remove(path);
    EXPECT_THROW(import_png(path), std::runtime_error);
    EXPECT_THROW(decode_png(std::vector<std::uint8_t>{1, 2, 3}), std::runtime_error);
    EXPECT_THROW(export_png(img, "/nonexistent-dir/x.png"), std::runtime_error);
}

TEST(Masks, RenderAndImport) {
    BinaryMask m(2, 3);
    m.set(0, 1, true);
    m.set(1, 2, true);
    const Image8 img = render_mask(m);
    EXPECT_EQ(img.channels, 1u);
    std::set<int> values(img.pixels.begin(), img.pixels.end());
    EXPECT_EQ(values, (std::set<int>{0, 255}));
    EXPECT_EQ(mask_from_image(img), m);
    EXPECT_EQ(mask_from_image(decode_png(encode_png(img))), m);
}

TEST(Images, TensorConversion) {
    const Image8 img{2, 1, 3, {0, 51, 255, 102, 153, 204}};
    const Tensor t = image_to_tensor(img);
    EXPECT_EQ(t.shape(), (Shape{3, 1, 2}));
    EXPECT_DOUBLE_EQ(t.at(1, 0, 0), 0.2);
    EXPECT_EQ(tensor_to_image(t), img);
}
