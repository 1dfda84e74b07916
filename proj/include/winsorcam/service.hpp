#pragma once

// Local HTTP service over the pipeline. Routes live under /v1/; `/` serves
// static UI assets.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "winsorcam/pipeline.hpp"

namespace winsorcam::service {

// Bundles loaded at startup, keyed by id (the file stem), with a lazily built
// PreparedBundle per (id, class index). Each prepared entry is built once.
class SessionCatalog {
public:
    SessionCatalog() = default;
    // Loads every *.wcam in `dir`, sorted by id. Throws BundleError on a bad file.
    static SessionCatalog load_directory(const std::filesystem::path& dir);

    void add(std::string id, SaliencyBundle bundle);

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const SaliencyBundle* find(const std::string& id) const;
    // nullptr for an unknown id.
    std::shared_ptr<const PreparedBundle> prepared(const std::string& id) const;

private:
    struct Slot {
        std::once_flag once;
        std::shared_ptr<const PreparedBundle> value;
    };
    std::vector<std::string> ids_;
    std::map<std::string, SaliencyBundle> bundles_;
    std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
    mutable std::map<std::pair<std::string, std::size_t>, std::shared_ptr<Slot>> cache_;
};

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

using Params = std::map<std::string, std::string>;

class Api {
public:
    explicit Api(const SessionCatalog& catalog) : catalog_(catalog) {}

    // Handles GET requests for /v1/... paths. Never throws.
    Response handle(const std::string& path, const Params& params) const;

private:
    Response bundles() const;
    Response heatmap(const Params& params) const;
    Response importances(const Params& params) const;
    Response metrics(const Params& params) const;

    const SessionCatalog& catalog_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;                   // 0 picks a free port
    std::filesystem::path static_dir;  // empty: built-in placeholder page
};

class HttpServer {
public:
    HttpServer(const Api& api, const ServerOptions& options);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Binds the socket and returns the port. Throws std::runtime_error on failure.
    int bind();
    // Serves until stop() is called from another thread.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// bind() then run().
void serve(const Api& api, const ServerOptions& options);

}  // namespace winsorcam::service
