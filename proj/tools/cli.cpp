#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "winsorcam/bundle.hpp"
#include "winsorcam/evaluation.hpp"
#include "winsorcam/image_io.hpp"
#include "winsorcam/pipeline.hpp"
#include "winsorcam/service.hpp"

namespace winsorcam::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MethodFlags {
    std::string agg = "mean";
    std::string interp = "bilinear";
    std::string bounds = "0.1,1.0";
    std::string range_source = "pre-clip";
};

void add_method_flags(CLI::App* cmd, MethodFlags& f) {
    cmd->add_option("--agg", f.agg, "Layer importance aggregation")
        ->check(CLI::IsMember({"mean", "max"}))
        ->capture_default_str();
    cmd->add_option("--interp", f.interp, "Interpolation kernel")
        ->check(CLI::IsMember({"bilinear", "nearest"}))
        ->capture_default_str();
    cmd->add_option("--bounds", f.bounds, "Normalization bounds L,H")->capture_default_str();
    cmd->add_option("--range-source", f.range_source, "Normalization range: pre-clip or post-clip")
        ->check(CLI::IsMember({"pre-clip", "post-clip"}))
        ->capture_default_str();
}

template <class F>
auto as_usage(F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

WinsorOptions to_options(const MethodFlags& f, double p) {
    WinsorOptions o;
    o.p = p;
    o.aggregation = as_usage([&] { return parse_aggregation(f.agg); });
    o.interp = as_usage([&] { return parse_interp(f.interp); });
    o.bounds = as_usage([&] { return parse_bounds(f.bounds); });
    o.range_source = as_usage([&] { return parse_range_source(f.range_source); });
    return o;
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw BundleError(BundleErrorKind::io, dir.string(), "cannot create directory: " + ec.message());
}

PreparedBundle load_prepared(const fs::path& path) { return PreparedBundle(path.stem().string(), read_bundle(path)); }

struct ComputeArgs {
    std::string bundle;
    std::string out;
    double p = 50.0;
    double alpha = kDefaultOverlayAlpha;
    MethodFlags method;
};

int cmd_compute(const ComputeArgs& a, std::ostream& out) {
    const WinsorOptions options = to_options(a.method, a.p);
    const PreparedBundle prepared = load_prepared(a.bundle);
    const WinsorCamResult result = prepared.winsor(options);
    const Analysis analysis = analyze_map(prepared, result.fused, options.interp);

    const fs::path dir(a.out);
    ensure_dir(dir);
    const struct {
        View view;
        const char* file;
    } views[] = {{View::fused, "heatmap.png"}, {View::overlay, "overlay.png"}, {View::binary, "binary.png"}};
    for (const auto& v : views) write_file(dir / v.file, render_view_png(prepared, analysis, v.view, a.alpha, options.interp));
    write_text(dir / "importance.json", importance_json(prepared, result, options).dump(2) + "\n");

    out << "wrote heatmap.png overlay.png binary.png importance.json to " << dir.string() << "\n";
    for (const auto& w : result.warnings) out << "warning: " << w << "\n";
    return kExitOk;
}

struct SweepArgs {
    std::string bundle;
    std::string out;
    std::string p_grid = "0:100:10";
    MethodFlags method;
};

SweepConfig to_sweep_config(const MethodFlags& f, const std::string& grid) {
    const WinsorOptions o = to_options(f, 50.0);
    SweepConfig c;
    c.p_grid = as_usage([&] { return parse_p_grid(grid); });
    c.aggregation = o.aggregation;
    c.interp = o.interp;
    c.bounds = o.bounds;
    c.range_source = o.range_source;
    return c;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    const SweepConfig config = to_sweep_config(a.method, a.p_grid);
    const PreparedBundle prepared = load_prepared(a.bundle);
    if (!prepared.bundle().has_mask())
        throw BundleError(BundleErrorKind::consistency, "mask.bin", "bundle has no ground-truth mask; sweep needs one");
    const SweepResult result = sweep(prepared, config);
    const std::vector<SweepResult> results{result};
    const std::string csv = records_csv(results);
    out << csv;
    out << "best_iou_p=" << format_real(*result.best_iou().p) << " iou=" << format_real(result.best_iou().iou)
        << "\nbest_com_p=" << format_real(*result.best_com().p)
        << " com_distance_px=" << format_real(result.best_com().com_distance_px) << "\n";
    if (!a.out.empty()) {
        const fs::path dir(a.out);
        ensure_dir(dir);
        write_text(dir / "sweep.csv", csv);
        const json doc = {{"bundle_id", result.bundle_id},
                          {"best_iou_p", *result.best_iou().p},
                          {"best_com_p", *result.best_com().p},
                          {"records", records_json(results)}};
        write_text(dir / "sweep.json", doc.dump(2) + "\n");
    }
    return kExitOk;
}

struct EvaluateArgs {
    std::string dir;
    std::string out;
    std::string p_grid = "0:100:10";
    MethodFlags method;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
    const SweepConfig config = to_sweep_config(a.method, a.p_grid);
    const auto catalog = service::SessionCatalog::load_directory(a.dir);
    if (catalog.ids().empty()) throw BundleError(BundleErrorKind::io, a.dir, "no .wcam bundles in directory");

    std::vector<std::string> ids;
    for (const auto& id : catalog.ids()) {
        if (catalog.find(id)->has_mask())
            ids.push_back(id);
        else
            err << "warning: skipping bundle '" << id << "' without ground-truth mask\n";
    }
    if (ids.empty()) throw BundleError(BundleErrorKind::consistency, a.dir, "no bundle carries a ground-truth mask");

    std::vector<SweepResult> results(ids.size());
    std::vector<std::string> failures(ids.size());
    const auto n = static_cast<std::ptrdiff_t>(ids.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            results[k] = sweep(*catalog.prepared(ids[k]), config);
        } catch (const std::exception& e) {
            failures[k] = e.what();
        }
    }
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (!failures[k].empty()) throw BundleError(BundleErrorKind::consistency, ids[k], failures[k]);
    }

    const auto summary = summarize(results);
    out << summary_table(summary);
    if (!a.out.empty()) {
        const fs::path dir(a.out);
        ensure_dir(dir);
        write_text(dir / "records.csv", records_csv(results));
        write_text(dir / "records.json", records_json(results).dump(2) + "\n");
        write_text(dir / "summary.csv", summary_csv(summary));
        write_text(dir / "summary.json", summary_json(summary).dump(2) + "\n");
        out << "wrote records.csv records.json summary.csv summary.json to " << dir.string() << "\n";
    }
    return kExitOk;
}

struct FixtureArgs {
    std::string out;
    std::uint64_t seed = 7;
    std::size_t count = 1;
    bool inputs = false;
};

int cmd_fixture(const FixtureArgs& a, std::ostream& out) {
    const fs::path dir(a.out);
    ensure_dir(dir);
    for (std::size_t i = 0; i < a.count; ++i) {
        const std::uint64_t seed = a.seed + i;
        char name[64];
        std::snprintf(name, sizeof name, "fixture_%03llu.wcam", static_cast<unsigned long long>(seed));
        write_bundle(make_fixture_bundle(seed), dir / name);
        out << "wrote " << (dir / name).string() << "\n";
        if (a.inputs) {
            const auto fx = make_synthetic_fixture(seed);
            const std::string stem = fs::path(name).stem().string();
            save_model(fx.model, dir / (stem + ".model"));
            export_png(tensor_to_image(fx.image), dir / (stem + "_image.png"));
            export_png(render_mask(BinaryMask::from_tensor(fx.mask)), dir / (stem + "_mask.png"));
            out << "wrote " << stem << ".model " << stem << "_image.png " << stem << "_mask.png\n";
        }
    }
    return kExitOk;
}

struct BundleArgs {
    std::string model;
    std::string image;
    std::string mask;
    std::string out;
    std::optional<std::size_t> class_index;
};

int cmd_bundle(const BundleArgs& a, std::ostream& out) {
    const MicroCnn model = load_model(a.model);
    const Tensor image = image_to_tensor(import_png(a.image));
    std::optional<Tensor> mask;
    if (!a.mask.empty()) mask = mask_from_image(import_png(a.mask)).tensor();
    std::size_t cls = a.class_index ? *a.class_index : argmax(model.forward(image).logits);
    write_bundle(make_bundle(model, image, cls, std::move(mask), "winsorcam bundle"), a.out);
    out << "wrote " << a.out << " (class " << cls << ")\n";
    return kExitOk;
}

struct ServeArgs {
    std::string bundle_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string static_dir;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    const auto catalog = service::SessionCatalog::load_directory(a.bundle_dir);
    const service::Api api(catalog);
    service::ServerOptions options;
    options.host = a.host;
    options.port = a.port;
    options.static_dir = a.static_dir;
    service::HttpServer server(api, options);
    const int port = server.bind();
    out << "serving " << catalog.ids().size() << " bundle(s) on http://" << a.host << ":" << port << "/\n"
        << std::flush;
    server.run();
    return kExitOk;
}

void report(std::ostream& err, bool json_errors, int code, const std::string& kind, const std::string& message,
            const std::string& field = {}) {
    if (json_errors) {
        json e = {{"error", kind}, {"message", message}, {"exit_code", code}};
        if (!field.empty()) e["field"] = field;
        err << e.dump() << "\n";
    } else {
        err << "error: " << message << "\n";
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Winsor-CAM saliency engine"};
    app.name(args.empty() ? "winsorcam" : fs::path(args.front()).filename().string());
    app.require_subcommand(1);
    app.fallthrough();
    bool json_errors = false;
    app.add_flag("--json-errors", json_errors, "Report errors as one-line JSON on stderr");

    ComputeArgs compute;
    auto* c = app.add_subcommand("compute", "Fused heatmap, overlay, binary mask and importance JSON for one bundle");
    c->add_option("bundle", compute.bundle, "Bundle file (.wcam)")->required();
    c->add_option("--out", compute.out, "Output directory")->required();
    c->add_option("--p", compute.p, "Winsorization percentile")->check(CLI::Range(0.0, 100.0))->capture_default_str();
    c->add_option("--alpha", compute.alpha, "Overlay opacity")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    add_method_flags(c, compute.method);

    SweepArgs sweep_args;
    auto* s = app.add_subcommand("sweep", "Evaluate one bundle over a grid of p values");
    s->add_option("bundle", sweep_args.bundle, "Bundle file (.wcam)")->required();
    s->add_option("--out", sweep_args.out, "Output directory for sweep.csv and sweep.json");
    s->add_option("--p-grid", sweep_args.p_grid, "start:stop:step or comma list")->capture_default_str();
    add_method_flags(s, sweep_args.method);

    EvaluateArgs evaluate;
    auto* e = app.add_subcommand("evaluate", "Sweep every bundle in a directory and summarize");
    e->add_option("dir", evaluate.dir, "Directory of .wcam bundles")->required();
    e->add_option("--out", evaluate.out, "Output directory for records and summary tables");
    e->add_option("--p-grid", evaluate.p_grid, "start:stop:step or comma list")->capture_default_str();
    add_method_flags(e, evaluate.method);

    FixtureArgs fixture;
    auto* f = app.add_subcommand("fixture", "Write synthetic fixture bundles");
    f->add_option("--out", fixture.out, "Output directory")->required();
    f->add_option("--seed", fixture.seed, "First seed")->capture_default_str();
    f->add_option("--count", fixture.count, "Number of bundles")->check(CLI::Range(1, 10000))->capture_default_str();
    f->add_flag("--inputs", fixture.inputs, "Also write each fixture's model and PNG image and mask");

    BundleArgs bundle;
    auto* b = app.add_subcommand("bundle", "Run a saved micro-CNN on a PNG image and write a bundle");
    b->add_option("--model", bundle.model, "Model file")->required();
    b->add_option("--image", bundle.image, "Input PNG")->required();
    b->add_option("--mask", bundle.mask, "Ground-truth mask PNG (nonzero = foreground)");
    b->add_option("--class", bundle.class_index, "Target class (default: predicted)");
    b->add_option("--out", bundle.out, "Output bundle path")->required();

    ServeArgs serve_args;
    auto* v = app.add_subcommand("serve", "Serve the /v1/ HTTP API and UI assets");
    v->add_option("--bundle-dir", serve_args.bundle_dir, "Directory of .wcam bundles")->required();
    v->add_option("--host", serve_args.host, "Bind address")->capture_default_str();
    v->add_option("--port", serve_args.port, "Port")->check(CLI::Range(1, 65535))->capture_default_str();
    v->add_option("--static-dir", serve_args.static_dir, "UI asset directory served at /");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("winsorcam");

    for (const auto& a : args)
        if (a == "--json-errors") json_errors = true;

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "winsorcam 1.0.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        report(err, json_errors, kExitUsage, "usage", ex.what());
        return kExitUsage;
    }

    try {
        if (c->parsed()) return cmd_compute(compute, out);
        if (s->parsed()) return cmd_sweep(sweep_args, out);
        if (e->parsed()) return cmd_evaluate(evaluate, out, err);
        if (f->parsed()) return cmd_fixture(fixture, out);
        if (b->parsed()) return cmd_bundle(bundle, out);
        if (v->parsed()) return cmd_serve(serve_args, out);
    } catch (const UsageError& ex) {
        report(err, json_errors, kExitUsage, "usage", ex.what());
        return kExitUsage;
    } catch (const BundleError& ex) {
        report(err, json_errors, kExitData, std::string(to_string(ex.kind())), ex.what(), ex.field());
        return kExitData;
    } catch (const std::exception& ex) {
        report(err, json_errors, kExitData, "data", ex.what());
        return kExitData;
    }
    report(err, json_errors, kExitUsage, "usage", "no subcommand given");
    return kExitUsage;
}

}  // namespace winsorcam::cli
