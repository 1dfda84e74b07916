#pragma once

// Saliency bundle container.
//
// Byte layout (all integers little-endian):
//   "WCAM"                      4-byte magic
//   u32 container_version       currently 1
//   u32 entry_count
//   entry_count times:
//     u32 name_length, name bytes (UTF-8)
//     u64 payload_length, payload bytes
// The first entry is always "manifest.json". Tensor blobs are row-major
// little-endian float32 unless the manifest says otherwise; per-layer blobs
// are named "<layer>/act.bin" and "<layer>/grad.bin".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "winsorcam/gradcam.hpp"
#include "winsorcam/microcnn.hpp"
#include "winsorcam/tensor.hpp"

namespace winsorcam {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr int kBundleFormatVersion = 1;

enum class BundleErrorKind { io, format, version, truncated, consistency };

std::string_view to_string(BundleErrorKind kind) noexcept;

// Parse or validation failure. field() names the offending entry or manifest key.
class BundleError : public std::runtime_error {
public:
    BundleError(BundleErrorKind kind, std::string field, const std::string& detail);
    BundleErrorKind kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }

private:
    BundleErrorKind kind_;
    std::string field_;
};

struct ArchiveEntry {
    std::string name;
    std::vector<std::uint8_t> bytes;
    friend bool operator==(const ArchiveEntry&, const ArchiveEntry&) = default;
};

struct Archive {
    nlohmann::json manifest;
    std::vector<ArchiveEntry> blobs;  // excludes manifest.json
};

std::vector<std::uint8_t> encode_archive(const Archive& archive);
Archive decode_archive(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_f32(const Tensor& t);
std::vector<std::uint8_t> encode_f64(const Tensor& t);
Tensor decode_f32(std::span<const std::uint8_t> bytes, const Shape& shape, const std::string& field);
Tensor decode_f64(std::span<const std::uint8_t> bytes, const Shape& shape, const std::string& field);

// Rounds every value to the nearest float32, the precision bundles store.
Tensor to_f32_precision(const Tensor& t);

struct SaliencyBundle {
    int format_version = kBundleFormatVersion;
    std::size_t class_index = 0;
    double logit = 0.0;
    std::string producer;
    std::string capture = "post_relu";
    std::optional<std::size_t> predicted_class;
    std::optional<std::size_t> true_class;
    std::vector<LayerCapture> layers;        // shallow to deep
    std::vector<nlohmann::json> layer_extra; // unknown per-layer manifest keys, parallel to layers
    Tensor image;                            // C x H x W, values in [0, 1]
    std::optional<Tensor> mask;              // H x W, values in {0, 1}
    nlohmann::json extra = nlohmann::json::object();  // unknown top-level manifest keys
    std::vector<ArchiveEntry> extra_blobs;             // entries the manifest does not reference

    bool has_mask() const noexcept { return mask.has_value(); }
    // nullopt when the manifest does not record both classes.
    std::optional<bool> prediction_correct() const;
};

// Throws BundleError(consistency) when the in-memory bundle violates an invariant.
void validate_bundle(const SaliencyBundle& bundle);

std::vector<std::uint8_t> encode_bundle(const SaliencyBundle& bundle);
SaliencyBundle decode_bundle(std::span<const std::uint8_t> bytes);

void write_bundle(const SaliencyBundle& bundle, const std::filesystem::path& path);
SaliencyBundle read_bundle(const std::filesystem::path& path);

// Runs the model on `image`, captures A^i and dy^c/dA^i for every conv layer,
// and packages them at float32 precision.
SaliencyBundle make_bundle(const MicroCnn& model, const Tensor& image, std::size_t class_index,
                           std::optional<Tensor> mask, std::string producer);

SaliencyBundle make_fixture_bundle(std::uint64_t seed);

// Model weights in the same container, stored as float64.
std::vector<std::uint8_t> encode_model(const MicroCnn& model);
MicroCnn decode_model(std::span<const std::uint8_t> bytes);
void save_model(const MicroCnn& model, const std::filesystem::path& path);
MicroCnn load_model(const std::filesystem::path& path);

}  // namespace winsorcam
