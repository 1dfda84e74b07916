#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "winsorcam/bundle.hpp"

using namespace winsorcam;
namespace fs = std::filesystem;

namespace {

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return b[off] | b[off + 1] << 8 | b[off + 2] << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

BundleErrorKind decode_error_kind(const std::vector<std::uint8_t>& bytes, std::string* field = nullptr) {
    try {
        decode_bundle(bytes);
    } catch (const BundleError& e) {
        if (field) *field = e.field();
        return e.kind();
    }
    ADD_FAILURE() << "decode succeeded";
    return BundleErrorKind::io;
}

Archive archive_of(const SaliencyBundle& b) { return decode_archive(encode_bundle(b)); }

}  // namespace

TEST(Archive, LayoutStartsWithMagicAndManifest) {
    const auto bytes = encode_bundle(make_fixture_bundle(7));
    ASSERT_GE(bytes.size(), 12u);
    EXPECT_EQ(std::memcmp(bytes.data(), "WCAM", 4), 0);
    EXPECT_EQ(read_u32(bytes, 4), kContainerVersion);
    const std::uint32_t name_len = read_u32(bytes, 12);
    EXPECT_EQ(std::string(bytes.begin() + 16, bytes.begin() + 16 + name_len), "manifest.json");
}

TEST(Bundle, RoundTripIsBitExact) {
    const auto b = make_fixture_bundle(7);
    const auto bytes = encode_bundle(b);
    const auto back = decode_bundle(bytes);
    ASSERT_EQ(back.layers.size(), b.layers.size());
    for (std::size_t i = 0; i < b.layers.size(); ++i) {
        EXPECT_EQ(back.layers[i].name, b.layers[i].name);
        EXPECT_EQ(back.layers[i].activation, b.layers[i].activation);
        EXPECT_EQ(back.layers[i].gradient, b.layers[i].gradient);
    }
    EXPECT_EQ(back.image, b.image);
    EXPECT_EQ(back.mask, b.mask);
    EXPECT_EQ(back.class_index, b.class_index);
    EXPECT_EQ(back.logit, b.logit);
    EXPECT_EQ(back.predicted_class, b.predicted_class);
    EXPECT_EQ(back.true_class, b.true_class);
    EXPECT_EQ(encode_bundle(back), bytes);
}

TEST(Bundle, FileRoundTrip) {
    const fs::path path = fs::temp_directory_path() / "winsorcam_test_bundle.wcam";
    const auto b = make_fixture_bundle(8);
    write_bundle(b, path);
    EXPECT_EQ(encode_bundle(read_bundle(path)), encode_bundle(b));
    fs::remove(path);
    EXPECT_THROW(read_bundle(path), BundleError);
}

TEST(Bundle, TruncationNamesTheTensor) {
    auto bytes = encode_bundle(make_fixture_bundle(7));
    bytes.pop_back();
    std::string field;
    EXPECT_EQ(decode_error_kind(bytes, &field), BundleErrorKind::truncated);
    EXPECT_NE(field.find(".bin"), std::string::npos) << field;
}

TEST(Bundle, BadMagicAndVersion) {
    auto bytes = encode_bundle(make_fixture_bundle(7));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_EQ(decode_error_kind(bad), BundleErrorKind::format);
    bad = bytes;
    bad[4] = 9;
    EXPECT_EQ(decode_error_kind(bad), BundleErrorKind::version);

    auto archive = archive_of(make_fixture_bundle(7));
    archive.manifest["format_version"] = 99;
    std::string field;
    EXPECT_EQ(decode_error_kind(encode_archive(archive), &field), BundleErrorKind::version);
    EXPECT_EQ(field, "format_version");
}

TEST(Bundle, ManifestShapeDisagreeingWithBlobIsConsistencyError) {
    auto archive = archive_of(make_fixture_bundle(7));
    auto& shape = archive.manifest["layers"][0]["shape"];
    shape[0] = shape[0].get<int>() + 1;
    std::string field;
    EXPECT_EQ(decode_error_kind(encode_archive(archive), &field), BundleErrorKind::consistency);
    EXPECT_NE(field.find("conv1"), std::string::npos) << field;
}

TEST(Bundle, MissingBlobIsConsistencyError) {
    auto archive = archive_of(make_fixture_bundle(7));
    archive.blobs.erase(archive.blobs.begin() + 2);
    EXPECT_EQ(decode_error_kind(encode_archive(archive)), BundleErrorKind::consistency);
}

TEST(Bundle, NegativeActivationRejected) {
    auto b = make_fixture_bundle(7);
    b.layers[0].activation[0] = -1.0;
    EXPECT_THROW(encode_bundle(b), BundleError);
}

TEST(Bundle, NonBinaryMaskRejected) {
    auto b = make_fixture_bundle(7);
    (*b.mask)[0] = 0.5;
    EXPECT_THROW(validate_bundle(b), BundleError);
}

TEST(Bundle, UnknownFieldsAndBlobsArePreserved) {
    auto archive = archive_of(make_fixture_bundle(7));
    archive.manifest["future_key"] = {{"nested", 1}};
    archive.manifest["layers"][1]["layer_note"] = "kept";
    archive.blobs.push_back({"extras/notes.bin", {1, 2, 3}});
    const auto bytes = encode_archive(archive);
    const auto b = decode_bundle(bytes);
    EXPECT_EQ(b.extra.at("future_key").at("nested"), 1);
    ASSERT_EQ(b.extra_blobs.size(), 1u);
    const auto again = archive_of(b);
    EXPECT_EQ(again.manifest.at("future_key"), archive.manifest.at("future_key"));
    EXPECT_EQ(again.manifest["layers"][1].at("layer_note"), "kept");
    EXPECT_EQ(again.blobs.back().name, "extras/notes.bin");
    EXPECT_EQ(again.blobs.back().bytes, (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(Bundle, PredictionCorrectness) {
    auto b = make_fixture_bundle(7);
    EXPECT_EQ(b.prediction_correct(), std::optional<bool>(true));
    b.true_class = 2;
    EXPECT_EQ(b.prediction_correct(), std::optional<bool>(false));
    b.true_class.reset();
    EXPECT_FALSE(b.prediction_correct().has_value());
}

TEST(Bundle, Float32Codec) {
    const Tensor t({2, 2}, std::vector<double>{0.1, -2.5, 3e30, 0.0});
    const auto bytes = encode_f32(t);
    EXPECT_EQ(bytes.size(), 16u);
    EXPECT_EQ(decode_f32(bytes, {2, 2}, "t"), to_f32_precision(t));
    EXPECT_THROW(decode_f32(bytes, {3, 2}, "t"), BundleError);
}

TEST(Model, RoundTripIsExact) {
    Architecture arch;
    arch.input = {3, 8, 8};
    arch.convs = {{4, true}, {6, false}};
    arch.num_classes = 5;
    const auto model = MicroCnn::random(arch, 99);
    EXPECT_EQ(decode_model(encode_model(model)), model);
    auto bytes = encode_model(model);
    bytes.resize(bytes.size() - 3);
    EXPECT_THROW(decode_model(bytes), BundleError);
}
