#include "winsorcam/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "httplib.h"
#include "winsorcam/evaluation.hpp"

namespace winsorcam::service {

using nlohmann::json;

SessionCatalog SessionCatalog::load_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw BundleError(BundleErrorKind::io, dir.string(), "not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".wcam") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    SessionCatalog catalog;
    for (const auto& file : files) catalog.add(file.stem().string(), read_bundle(file));
    return catalog;
}

void SessionCatalog::add(std::string id, SaliencyBundle bundle) {
    if (bundles_.count(id)) throw std::invalid_argument("duplicate bundle id '" + id + "'");
    validate_bundle(bundle);
    ids_.insert(std::upper_bound(ids_.begin(), ids_.end(), id), id);
    bundles_.emplace(std::move(id), std::move(bundle));
}

const SaliencyBundle* SessionCatalog::find(const std::string& id) const {
    const auto it = bundles_.find(id);
    return it == bundles_.end() ? nullptr : &it->second;
}

std::shared_ptr<const PreparedBundle> SessionCatalog::prepared(const std::string& id) const {
    const SaliencyBundle* bundle = find(id);
    if (!bundle) return nullptr;
    std::shared_ptr<Slot> slot;
    {
        std::lock_guard lock(*mutex_);
        auto& s = cache_[{id, bundle->class_index}];
        if (!s) s = std::make_shared<Slot>();
        slot = s;
    }
    std::call_once(slot->once, [&] { slot->value = std::make_shared<const PreparedBundle>(id, *bundle); });
    return slot->value;
}

namespace {

struct HttpError : std::runtime_error {
    HttpError(int status, const std::string& message) : std::runtime_error(message), status(status) {}
    int status;
};

Response json_response(int status, const json& body) { return {status, "application/json", body.dump() + "\n"}; }

Response error_response(int status, const std::string& message) {
    return json_response(status, {{"error", message}, {"status", status}});
}

const std::string* param(const Params& params, const std::string& key) {
    const auto it = params.find(key);
    return it == params.end() ? nullptr : &it->second;
}

double parse_real(const std::string& key, const std::string& text, double lo, double hi) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !(v >= lo && v <= hi)) {
        throw HttpError(400, "parameter '" + key + "' must be a number in [" + format_real(lo) + ", " + format_real(hi) +
                                 "], got '" + text + "'");
    }
    return v;
}

template <class Parse>
auto parse_enum(const Params& params, const std::string& key, Parse parse, decltype(parse("")) fallback) {
    const std::string* v = param(params, key);
    if (!v) return fallback;
    try {
        return parse(*v);
    } catch (const std::invalid_argument& e) {
        throw HttpError(400, e.what());
    }
}

WinsorOptions options_from(const Params& params) {
    WinsorOptions o;
    if (const auto* p = param(params, "p")) o.p = parse_real("p", *p, 0.0, 100.0);
    o.aggregation = parse_enum(params, "agg", parse_aggregation, o.aggregation);
    o.interp = parse_enum(params, "interp", parse_interp, o.interp);
    o.range_source = parse_enum(params, "range_source", parse_range_source, o.range_source);
    if (const auto* b = param(params, "bounds")) {
        try {
            o.bounds = parse_bounds(*b);
        } catch (const std::invalid_argument& e) {
            throw HttpError(400, e.what());
        }
    }
    return o;
}

}  // namespace

Response Api::handle(const std::string& path, const Params& params) const {
    try {
        if (path == "/v1/bundles") return bundles();
        if (path == "/v1/heatmap") return heatmap(params);
        if (path == "/v1/importances") return importances(params);
        if (path == "/v1/metrics") return metrics(params);
        return error_response(404, "no route for '" + path + "'");
    } catch (const HttpError& e) {
        return error_response(e.status, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

namespace {

std::shared_ptr<const PreparedBundle> require_bundle(const SessionCatalog& catalog, const Params& params) {
    const std::string* id = param(params, "bundle");
    if (!id) throw HttpError(400, "missing parameter 'bundle'");
    auto prepared = catalog.prepared(*id);
    if (!prepared) throw HttpError(404, "unknown bundle '" + *id + "'");
    return prepared;
}

json metrics_json(const MapMetrics& m) { return {{"iou", m.iou}, {"com_distance_px", m.com_distance_px}}; }

}  // namespace

Response Api::bundles() const {
    json list = json::array();
    for (const auto& id : catalog_.ids()) {
        const SaliencyBundle& b = *catalog_.find(id);
        json layers = json::array();
        for (const auto& layer : b.layers) {
            layers.push_back({{"name", layer.name},
                              {"channels", layer.activation.dim(0)},
                              {"height", layer.activation.dim(1)},
                              {"width", layer.activation.dim(2)}});
        }
        json entry = {{"id", id},
                      {"layers", std::move(layers)},
                      {"has_mask", b.has_mask()},
                      {"class", b.class_index},
                      {"height", b.image.dim(1)},
                      {"width", b.image.dim(2)}};
        entry["predicted_class"] = b.predicted_class ? json(*b.predicted_class) : json(nullptr);
        entry["true_class"] = b.true_class ? json(*b.true_class) : json(nullptr);
        list.push_back(std::move(entry));
    }
    return json_response(200, list);
}

Response Api::heatmap(const Params& params) const {
    const WinsorOptions options = options_from(params);
    const View view = parse_enum(params, "view", parse_view, View::fused);
    const Method method = parse_enum(params, "method", parse_method, Method::winsor);
    double alpha = kDefaultOverlayAlpha;
    if (const auto* a = param(params, "alpha")) alpha = parse_real("alpha", *a, 0.0, 1.0);
    const auto prepared = require_bundle(catalog_, params);
    const Analysis analysis = analyze_map(*prepared, method_map(*prepared, method, options), options.interp);
    const auto png = render_view_png(*prepared, analysis, view, alpha, options.interp);
    return {200, "image/png", std::string(png.begin(), png.end())};
}

Response Api::importances(const Params& params) const {
    const WinsorOptions options = options_from(params);
    const auto prepared = require_bundle(catalog_, params);
    return json_response(200, importance_json(*prepared, prepared->winsor(options), options));
}

Response Api::metrics(const Params& params) const {
    const WinsorOptions options = options_from(params);
    const auto prepared = require_bundle(catalog_, params);
    const auto& bundle = prepared->bundle();
    if (!bundle.has_mask())
        throw HttpError(409, "bundle '" + prepared->id() + "' has no ground-truth mask; metrics are unavailable");
    const Tensor& mask = *bundle.mask;
    const auto winsor = evaluate_map(prepared->winsor(options).fused, mask, options.interp);
    json body = metrics_json(winsor);
    body["bundle"] = prepared->id();
    body["p"] = options.p;
    body["aggregation"] = to_string(options.aggregation);
    body["interp"] = to_string(options.interp);
    body["baselines"] = {
        {"final_layer", metrics_json(evaluate_map(prepared->final_layer(options.interp), mask, options.interp))},
        {"naive_mean", metrics_json(evaluate_map(prepared->naive_mean(options.interp), mask, options.interp))}};
    return json_response(200, body);
}

namespace {

constexpr const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>winsorcam</title></head>
<body><h1>winsorcam service</h1>
<p>No UI assets configured. Start with <code>--static-dir</code> to serve the browser workbench.</p>
<p>API: <a href="/v1/bundles">/v1/bundles</a>, /v1/heatmap, /v1/importances, /v1/metrics</p>
</body></html>
)";

}  // namespace

struct HttpServer::Impl {
    httplib::Server server;
    ServerOptions options;
    std::atomic<bool> stopping{false};
};

HttpServer::HttpServer(const Api& api, const ServerOptions& options) : impl_(std::make_unique<Impl>()) {
    impl_->options = options;
    auto& server = impl_->server;
    server.Get(R"(/v1/.*)", [&api](const httplib::Request& req, httplib::Response& res) {
        Params params;
        for (const auto& [k, v] : req.params) params.emplace(k, v);
        const Response r = api.handle(req.path, params);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    });
    if (!options.static_dir.empty()) {
        if (!server.set_mount_point("/", options.static_dir.string()))
            throw std::runtime_error("static directory '" + options.static_dir.string() + "' does not exist");
    } else {
        server.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(kPlaceholderPage, "text/html");
        });
    }
}

HttpServer::~HttpServer() = default;

int HttpServer::bind() {
    const auto& o = impl_->options;
    const int port = o.port == 0 ? impl_->server.bind_to_any_port(o.host) : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
    if (port <= 0) throw std::runtime_error("cannot listen on " + o.host + ":" + std::to_string(o.port));
    return port;
}

void HttpServer::run() {
    if (!impl_->server.listen_after_bind() && !impl_->stopping) throw std::runtime_error("server stopped with an error");
}

void HttpServer::stop() {
    impl_->stopping = true;
    impl_->server.stop();
}

void serve(const Api& api, const ServerOptions& options) {
    HttpServer server(api, options);
    server.bind();
    server.run();
}

}  // namespace winsorcam::service
