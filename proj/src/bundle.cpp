#include "winsorcam/bundle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace winsorcam {

using nlohmann::json;

std::string_view to_string(BundleErrorKind kind) noexcept {
    switch (kind) {
        case BundleErrorKind::io: return "io";
        case BundleErrorKind::format: return "format";
        case BundleErrorKind::version: return "version";
        case BundleErrorKind::truncated: return "truncated";
        case BundleErrorKind::consistency: return "consistency";
    }
    return "unknown";
}

BundleError::BundleError(BundleErrorKind kind, std::string field, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + " error in '" + field + "': " + detail),
      kind_(kind),
      field_(std::move(field)) {}

namespace {

constexpr char kMagic[4] = {'W', 'C', 'A', 'M'};
constexpr const char* kManifestName = "manifest.json";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_entry(std::vector<std::uint8_t>& out, const std::string& name, std::span<const std::uint8_t> bytes) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u64(out, bytes.size());
    out.insert(out.end(), bytes.begin(), bytes.end());
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::span<const std::uint8_t> take(std::uint64_t n, const std::string& field) {
        if (n > bytes_.size() - pos_) {
            throw BundleError(BundleErrorKind::truncated, field,
                              "needs " + std::to_string(n) + " bytes, only " + std::to_string(bytes_.size() - pos_) +
                                  " remain");
        }
        auto s = bytes_.subspan(pos_, static_cast<std::size_t>(n));
        pos_ += static_cast<std::size_t>(n);
        return s;
    }

    std::uint32_t u32(const std::string& field) {
        auto s = take(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64(const std::string& field) {
        auto s = take(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
        return v;
    }

    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

[[noreturn]] void fail(BundleErrorKind kind, const std::string& field, const std::string& detail) {
    throw BundleError(kind, field, detail);
}

const json& require_key(const json& obj, const std::string& key, const std::string& scope) {
    const std::string field = scope.empty() ? key : scope + "." + key;
    if (!obj.is_object() || !obj.contains(key)) fail(BundleErrorKind::format, field, "missing required field");
    return obj.at(key);
}

std::size_t require_index(const json& obj, const std::string& key, const std::string& scope) {
    const json& v = require_key(obj, key, scope);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        fail(BundleErrorKind::format, scope.empty() ? key : scope + "." + key, "expected a non-negative integer");
    return v.get<std::size_t>();
}

std::string require_string(const json& obj, const std::string& key, const std::string& scope) {
    const json& v = require_key(obj, key, scope);
    if (!v.is_string()) fail(BundleErrorKind::format, scope.empty() ? key : scope + "." + key, "expected a string");
    return v.get<std::string>();
}

Shape require_shape(const json& obj, const std::string& scope, std::size_t rank) {
    const json& v = require_key(obj, "shape", scope);
    const std::string field = scope + ".shape";
    if (!v.is_array() || v.size() != rank) fail(BundleErrorKind::format, field, "expected " + std::to_string(rank) + " extents");
    Shape shape;
    for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<std::int64_t>() <= 0) fail(BundleErrorKind::format, field, "extents must be positive integers");
        shape.push_back(e.get<std::size_t>());
    }
    return shape;
}

json shape_json(const Shape& shape) { return json(std::vector<std::size_t>(shape.begin(), shape.end())); }

json without_keys(const json& obj, std::initializer_list<const char*> keys) {
    json out = json::object();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) out[it.key()] = it.value();
    }
    return out;
}

class BlobTable {
public:
    explicit BlobTable(std::vector<ArchiveEntry> entries) : entries_(std::move(entries)) {}

    std::span<const std::uint8_t> get(const std::string& name) {
        for (const auto& e : entries_) {
            if (e.name == name) {
                used_.insert(name);
                return e.bytes;
            }
        }
        fail(BundleErrorKind::consistency, name, "blob referenced by the manifest is missing from the archive");
    }

    std::vector<ArchiveEntry> unused() const {
        std::vector<ArchiveEntry> out;
        for (const auto& e : entries_)
            if (!used_.count(e.name)) out.push_back(e);
        return out;
    }

private:
    std::vector<ArchiveEntry> entries_;
    std::set<std::string> used_;
};

std::string act_blob(const std::string& layer) { return layer + "/act.bin"; }
std::string grad_blob(const std::string& layer) { return layer + "/grad.bin"; }

}  // namespace

std::vector<std::uint8_t> encode_archive(const Archive& archive) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kContainerVersion);
    put_u32(out, static_cast<std::uint32_t>(archive.blobs.size() + 1));
    const std::string manifest = archive.manifest.dump(2) + "\n";
    put_entry(out, kManifestName,
              std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(manifest.data()), manifest.size()));
    for (const auto& blob : archive.blobs) put_entry(out, blob.name, blob.bytes);
    return out;
}

Archive decode_archive(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    auto magic = in.take(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic)))
        fail(BundleErrorKind::format, "magic", "not a WCAM archive");
    const std::uint32_t version = in.u32("container_version");
    if (version != kContainerVersion) {
        fail(BundleErrorKind::version, "container_version",
             "unsupported container version " + std::to_string(version) + " (expected " +
                 std::to_string(kContainerVersion) + ")");
    }
    const std::uint32_t count = in.u32("entry_count");
    if (count == 0) fail(BundleErrorKind::format, kManifestName, "archive has no entries");

    Archive archive;
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string where = "entry " + std::to_string(i);
        const std::uint32_t name_len = in.u32(where + " name length");
        auto name_bytes = in.take(name_len, where + " name");
        std::string name(name_bytes.begin(), name_bytes.end());
        if (name.empty()) fail(BundleErrorKind::format, where, "empty entry name");
        if (!seen.insert(name).second) fail(BundleErrorKind::format, name, "duplicate entry name");
        const std::uint64_t len = in.u64(name);
        auto payload = in.take(len, name);
        if (i == 0) {
            if (name != kManifestName) fail(BundleErrorKind::format, name, "first entry must be manifest.json");
            try {
                archive.manifest = json::parse(payload.begin(), payload.end());
            } catch (const json::parse_error& e) {
                fail(BundleErrorKind::format, kManifestName, e.what());
            }
            if (!archive.manifest.is_object()) fail(BundleErrorKind::format, kManifestName, "manifest must be a JSON object");
        } else {
            archive.blobs.push_back({std::move(name), std::vector<std::uint8_t>(payload.begin(), payload.end())});
        }
    }
    if (!in.done()) fail(BundleErrorKind::format, "archive", "trailing bytes after the last entry");
    return archive;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(BundleErrorKind::io, path.string(), "cannot open for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) fail(BundleErrorKind::io, path.string(), "read failed");
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(BundleErrorKind::io, path.string(), "cannot open for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(BundleErrorKind::io, path.string(), "write failed");
}

std::vector<std::uint8_t> encode_f32(const Tensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(t.size() * 4);
    for (double v : t.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    return out;
}

std::vector<std::uint8_t> encode_f64(const Tensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(t.size() * 8);
    for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

namespace {

template <typename Float, typename Bits>
Tensor decode_floats(std::span<const std::uint8_t> bytes, const Shape& shape, const std::string& field) {
    const std::size_t n = shape_volume(shape);
    if (bytes.size() != n * sizeof(Float)) {
        fail(BundleErrorKind::consistency, field,
             "blob holds " + std::to_string(bytes.size()) + " bytes but shape " + shape_to_string(shape) + " needs " +
                 std::to_string(n * sizeof(Float)));
    }
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        Bits bits = 0;
        for (std::size_t b = 0; b < sizeof(Bits); ++b) bits |= static_cast<Bits>(bytes[i * sizeof(Bits) + b]) << (8 * b);
        const double v = static_cast<double>(std::bit_cast<Float>(bits));
        if (!std::isfinite(v)) fail(BundleErrorKind::consistency, field, "non-finite value at index " + std::to_string(i));
        data[i] = v;
    }
    return Tensor(shape, std::move(data));
}

}  // namespace

Tensor decode_f32(std::span<const std::uint8_t> bytes, const Shape& shape, const std::string& field) {
    return decode_floats<float, std::uint32_t>(bytes, shape, field);
}

Tensor decode_f64(std::span<const std::uint8_t> bytes, const Shape& shape, const std::string& field) {
    return decode_floats<double, std::uint64_t>(bytes, shape, field);
}

Tensor to_f32_precision(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.values()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

std::optional<bool> SaliencyBundle::prediction_correct() const {
    if (!predicted_class || !true_class) return std::nullopt;
    return *predicted_class == *true_class;
}

void validate_bundle(const SaliencyBundle& b) {
    auto bad = [](const std::string& field, const std::string& detail) {
        fail(BundleErrorKind::consistency, field, detail);
    };
    if (b.format_version != kBundleFormatVersion)
        fail(BundleErrorKind::version, "format_version", "unsupported bundle version " + std::to_string(b.format_version));
    if (b.layers.empty()) bad("layers", "bundle has no layers");
    if (!b.layer_extra.empty() && b.layer_extra.size() != b.layers.size()) bad("layers", "layer_extra length mismatch");
    std::set<std::string> names;
    for (const auto& layer : b.layers) {
        if (layer.name.empty()) bad("layers", "layer with empty name");
        if (!names.insert(layer.name).second) bad(layer.name, "duplicate layer name");
        if (layer.activation.rank() != 3) bad(act_blob(layer.name), "activation must be C x H x W");
        if (layer.activation.shape() != layer.gradient.shape())
            bad(grad_blob(layer.name), "gradient shape " + shape_to_string(layer.gradient.shape()) +
                                           " differs from activation shape " + shape_to_string(layer.activation.shape()));
        if (b.capture == "post_relu" && layer.activation.min() < 0.0)
            bad(act_blob(layer.name), "negative activation in a post_relu capture");
    }
    if (b.image.rank() != 3) bad("image", "image must be C x H x W");
    if (b.mask) {
        if (b.mask->shape() != Shape{b.image.dim(1), b.image.dim(2)})
            bad("mask", "mask shape " + shape_to_string(b.mask->shape()) + " must equal the image's H x W");
        for (double v : b.mask->values())
            if (v != 0.0 && v != 1.0) bad("mask", "mask values must be 0 or 1");
    }
}

std::vector<std::uint8_t> encode_bundle(const SaliencyBundle& b) {
    validate_bundle(b);
    Archive archive;
    json m = b.extra.is_object() ? b.extra : json::object();
    m["format_version"] = b.format_version;
    m["kind"] = "saliency_bundle";
    m["class_index"] = b.class_index;
    m["logit"] = b.logit;
    m["producer"] = b.producer;
    m["capture"] = b.capture;
    if (b.predicted_class) m["predicted_class"] = *b.predicted_class;
    if (b.true_class) m["true_class"] = *b.true_class;

    m["image"] = {{"blob", "image.bin"}, {"shape", shape_json(b.image.shape())}};
    archive.blobs.push_back({"image.bin", encode_f32(b.image)});
    if (b.mask) {
        m["mask"] = {{"blob", "mask.bin"}, {"shape", shape_json(b.mask->shape())}};
        archive.blobs.push_back({"mask.bin", encode_f32(*b.mask)});
    }

    json layers = json::array();
    for (std::size_t i = 0; i < b.layers.size(); ++i) {
        const auto& layer = b.layers[i];
        json entry = (i < b.layer_extra.size() && b.layer_extra[i].is_object()) ? b.layer_extra[i] : json::object();
        entry["name"] = layer.name;
        entry["shape"] = shape_json(layer.activation.shape());
        layers.push_back(std::move(entry));
        archive.blobs.push_back({act_blob(layer.name), encode_f32(layer.activation)});
        archive.blobs.push_back({grad_blob(layer.name), encode_f32(layer.gradient)});
    }
    m["layers"] = std::move(layers);

    for (const auto& blob : b.extra_blobs) {
        const bool clash = std::any_of(archive.blobs.begin(), archive.blobs.end(),
                                       [&](const ArchiveEntry& e) { return e.name == blob.name; });
        if (!clash && blob.name != kManifestName) archive.blobs.push_back(blob);
    }
    archive.manifest = std::move(m);
    return encode_archive(archive);
}

SaliencyBundle decode_bundle(std::span<const std::uint8_t> bytes) {
    Archive archive = decode_archive(bytes);
    const json& m = archive.manifest;

    SaliencyBundle b;
    const json& version = require_key(m, "format_version", "");
    if (!version.is_number_integer()) fail(BundleErrorKind::format, "format_version", "expected an integer");
    b.format_version = version.get<int>();
    if (b.format_version != kBundleFormatVersion) {
        fail(BundleErrorKind::version, "format_version",
             "unsupported bundle version " + std::to_string(b.format_version) + " (expected " +
                 std::to_string(kBundleFormatVersion) + ")");
    }
    if (m.contains("kind") && m["kind"] != "saliency_bundle")
        fail(BundleErrorKind::format, "kind", "expected \"saliency_bundle\"");

    b.class_index = require_index(m, "class_index", "");
    const json& logit = require_key(m, "logit", "");
    if (!logit.is_number()) fail(BundleErrorKind::format, "logit", "expected a number");
    b.logit = logit.get<double>();
    b.producer = m.contains("producer") ? require_string(m, "producer", "") : std::string();
    b.capture = m.contains("capture") ? require_string(m, "capture", "") : std::string("post_relu");
    if (m.contains("predicted_class")) b.predicted_class = require_index(m, "predicted_class", "");
    if (m.contains("true_class")) b.true_class = require_index(m, "true_class", "");

    BlobTable blobs(std::move(archive.blobs));

    const json& image = require_key(m, "image", "");
    const std::string image_blob = require_string(image, "blob", "image");
    b.image = decode_f32(blobs.get(image_blob), require_shape(image, "image", 3), image_blob);

    if (m.contains("mask") && !m["mask"].is_null()) {
        const json& mask = m["mask"];
        const std::string mask_blob = require_string(mask, "blob", "mask");
        b.mask = decode_f32(blobs.get(mask_blob), require_shape(mask, "mask", 2), mask_blob);
    }

    const json& layers = require_key(m, "layers", "");
    if (!layers.is_array()) fail(BundleErrorKind::format, "layers", "expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string scope = "layers[" + std::to_string(i) + "]";
        const json& entry = layers[i];
        const std::string name = require_string(entry, "name", scope);
        const Shape shape = require_shape(entry, scope, 3);
        LayerCapture layer{name, decode_f32(blobs.get(act_blob(name)), shape, act_blob(name)),
                           decode_f32(blobs.get(grad_blob(name)), shape, grad_blob(name))};
        b.layers.push_back(std::move(layer));
        b.layer_extra.push_back(without_keys(entry, {"name", "shape"}));
    }

    b.extra = without_keys(m, {"format_version", "kind", "class_index", "logit", "producer", "capture",
                               "predicted_class", "true_class", "image", "mask", "layers"});
    b.extra_blobs = blobs.unused();
    validate_bundle(b);
    return b;
}

void write_bundle(const SaliencyBundle& bundle, const std::filesystem::path& path) {
    write_file(path, encode_bundle(bundle));
}

SaliencyBundle read_bundle(const std::filesystem::path& path) { return decode_bundle(read_file(path)); }

SaliencyBundle make_bundle(const MicroCnn& model, const Tensor& image, std::size_t class_index,
                           std::optional<Tensor> mask, std::string producer) {
    const ForwardTrace trace = model.forward(image);
    const auto grads = backward_to_activations(model, trace, class_index);
    SaliencyBundle b;
    b.class_index = class_index;
    b.logit = trace.logits[class_index];
    b.producer = std::move(producer);
    b.predicted_class = argmax(trace.logits);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        b.layers.push_back({model.convs()[i].name, to_f32_precision(trace.activations[i]), to_f32_precision(grads[i])});
        b.layer_extra.push_back(json::object());
    }
    b.image = to_f32_precision(image);
    b.mask = std::move(mask);
    validate_bundle(b);
    return b;
}

SaliencyBundle make_fixture_bundle(std::uint64_t seed) {
    auto fx = make_synthetic_fixture(seed);
    auto b = make_bundle(fx.model, fx.image, fx.target_class, fx.mask, "winsorcam synthetic fixture");
    b.true_class = fx.target_class;
    b.extra["fixture_seed"] = seed;
    return b;
}

std::vector<std::uint8_t> encode_model(const MicroCnn& model) {
    Archive archive;
    json convs = json::array();
    for (const auto& c : model.convs()) {
        convs.push_back({{"name", c.name},
                         {"in_channels", c.in_channels},
                         {"out_channels", c.out_channels},
                         {"pool_after", c.pool_after}});
        archive.blobs.push_back({c.name + "/weight.bin", encode_f64(c.weight)});
        archive.blobs.push_back({c.name + "/bias.bin", encode_f64(Tensor({c.bias.size()}, c.bias))});
    }
    const auto& d = model.dense();
    archive.blobs.push_back({"dense/weight.bin", encode_f64(d.weight)});
    archive.blobs.push_back({"dense/bias.bin", encode_f64(Tensor({d.bias.size()}, d.bias))});
    archive.manifest = {{"format_version", kBundleFormatVersion},
                        {"kind", "micro_cnn"},
                        {"dtype", "float64"},
                        {"input",
                         {{"channels", model.input().channels},
                          {"height", model.input().height},
                          {"width", model.input().width}}},
                        {"convs", std::move(convs)},
                        {"dense", {{"in_features", d.in_features}, {"num_classes", d.num_classes}}}};
    return encode_archive(archive);
}

MicroCnn decode_model(std::span<const std::uint8_t> bytes) {
    Archive archive = decode_archive(bytes);
    const json& m = archive.manifest;
    if (require_key(m, "format_version", "") != kBundleFormatVersion)
        fail(BundleErrorKind::version, "format_version", "unsupported model version");
    if (require_string(m, "kind", "") != "micro_cnn") fail(BundleErrorKind::format, "kind", "expected \"micro_cnn\"");
    if (require_string(m, "dtype", "") != "float64") fail(BundleErrorKind::format, "dtype", "expected \"float64\"");

    BlobTable blobs(std::move(archive.blobs));
    const json& in = require_key(m, "input", "");
    InputSpec input{require_index(in, "channels", "input"), require_index(in, "height", "input"),
                    require_index(in, "width", "input")};

    std::vector<ConvLayer> convs;
    const json& cj = require_key(m, "convs", "");
    if (!cj.is_array()) fail(BundleErrorKind::format, "convs", "expected an array");
    for (std::size_t i = 0; i < cj.size(); ++i) {
        const std::string scope = "convs[" + std::to_string(i) + "]";
        ConvLayer c;
        c.name = require_string(cj[i], "name", scope);
        c.in_channels = require_index(cj[i], "in_channels", scope);
        c.out_channels = require_index(cj[i], "out_channels", scope);
        const json& pool = require_key(cj[i], "pool_after", scope);
        if (!pool.is_boolean()) fail(BundleErrorKind::format, scope + ".pool_after", "expected a boolean");
        c.pool_after = pool.get<bool>();
        if (c.in_channels == 0 || c.out_channels == 0) fail(BundleErrorKind::consistency, scope, "channel counts must be positive");
        c.weight = decode_f64(blobs.get(c.name + "/weight.bin"), {c.out_channels, c.in_channels, 3, 3}, c.name + "/weight.bin");
        c.bias = decode_f64(blobs.get(c.name + "/bias.bin"), {c.out_channels}, c.name + "/bias.bin").data();
        convs.push_back(std::move(c));
    }
    const json& dj = require_key(m, "dense", "");
    DenseLayer d;
    d.in_features = require_index(dj, "in_features", "dense");
    d.num_classes = require_index(dj, "num_classes", "dense");
    if (d.in_features == 0 || d.num_classes == 0) fail(BundleErrorKind::consistency, "dense", "sizes must be positive");
    d.weight = decode_f64(blobs.get("dense/weight.bin"), {d.num_classes, d.in_features}, "dense/weight.bin");
    d.bias = decode_f64(blobs.get("dense/bias.bin"), {d.num_classes}, "dense/bias.bin").data();
    try {
        return MicroCnn(input, std::move(convs), std::move(d));
    } catch (const std::invalid_argument& e) {
        fail(BundleErrorKind::consistency, "convs", e.what());
    }
}

void save_model(const MicroCnn& model, const std::filesystem::path& path) { write_file(path, encode_model(model)); }

MicroCnn load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace winsorcam
