#include "winsorcam/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace winsorcam {

using nlohmann::json;

std::vector<double> default_p_grid() {
    std::vector<double> grid;
    for (int p = 0; p <= 100; p += 10) grid.push_back(p);
    return grid;
}

namespace {

double parse_number(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw std::invalid_argument("p grid: '" + std::string(text) + "' is not a number");
    return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

}  // namespace

std::vector<double> parse_p_grid(std::string_view text) {
    std::vector<double> grid;
    if (text.find(':') != std::string_view::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw std::invalid_argument("p grid: expected start:stop:step");
        const double start = parse_number(parts[0]);
        const double stop = parse_number(parts[1]);
        const double step = parse_number(parts[2]);
        if (!(step > 0.0)) throw std::invalid_argument("p grid: step must be positive");
        if (!(start <= stop)) throw std::invalid_argument("p grid: start exceeds stop");
        const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) grid.push_back(std::min(start + static_cast<double>(i) * step, stop));
    } else {
        for (auto part : split(text, ',')) grid.push_back(parse_number(part));
    }
    if (grid.empty()) throw std::invalid_argument("p grid: empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= 100.0))
            throw std::invalid_argument("p grid: " + format_real(grid[i]) + " outside [0, 100]");
        if (std::find(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(i), grid[i]) !=
            grid.begin() + static_cast<std::ptrdiff_t>(i))
            throw std::invalid_argument("p grid: duplicate value " + format_real(grid[i]));
    }
    return grid;
}

const EvalRecord& SweepResult::best_iou() const {
    for (const auto& r : records)
        if (r.best_iou) return r;
    throw std::logic_error("sweep result without best IoU row");
}

const EvalRecord& SweepResult::best_com() const {
    for (const auto& r : records)
        if (r.best_com) return r;
    throw std::logic_error("sweep result without best CoM row");
}

const EvalRecord& SweepResult::baseline(Method method) const {
    for (const auto& r : records)
        if (r.method == method) return r;
    throw std::logic_error("sweep result without baseline row");
}

SweepResult sweep(const PreparedBundle& prepared, const SweepConfig& config) {
    const auto& bundle = prepared.bundle();
    if (!bundle.has_mask()) throw std::invalid_argument("bundle '" + prepared.id() + "' has no ground-truth mask");
    if (config.p_grid.empty()) throw std::invalid_argument("sweep: empty p grid");
    const Tensor& mask = *bundle.mask;

    SweepResult out;
    out.bundle_id = prepared.id();
    out.correct = bundle.prediction_correct();

    auto record = [&](Method method, std::optional<double> p, const Tensor& map) {
        const MapMetrics m = evaluate_map(map, mask, config.interp);
        EvalRecord r;
        r.bundle_id = prepared.id();
        r.method = method;
        r.aggregation = config.aggregation;
        r.interp = config.interp;
        r.p = p;
        r.iou = m.iou;
        r.com_distance_px = m.com_distance_px;
        out.records.push_back(std::move(r));
    };

    WinsorOptions options;
    options.aggregation = config.aggregation;
    options.interp = config.interp;
    options.bounds = config.bounds;
    options.range_source = config.range_source;
    for (double p : config.p_grid) {
        options.p = p;
        record(Method::winsor, p, prepared.winsor(options).fused);
    }
    std::size_t best_iou = 0, best_com = 0;
    for (std::size_t i = 1; i < config.p_grid.size(); ++i) {
        if (out.records[i].iou > out.records[best_iou].iou) best_iou = i;
        if (out.records[i].com_distance_px < out.records[best_com].com_distance_px) best_com = i;
    }
    out.records[best_iou].best_iou = true;
    out.records[best_com].best_com = true;

    record(Method::final_layer, std::nullopt, prepared.final_layer(config.interp));
    record(Method::naive_mean, std::nullopt, prepared.naive_mean(config.interp));
    return out;
}

namespace {

struct Stats {
    double mean = 0.0;
    double stddev = 0.0;
};

Stats population_stats(const std::vector<double>& xs) {
    Stats s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
    return s;
}

}  // namespace

std::vector<SummaryRow> summarize(std::span<const SweepResult> results) {
    struct Split {
        std::string name;
        std::optional<bool> correct;
    };
    std::vector<Split> splits{{"all", std::nullopt}};
    const bool labelled = std::any_of(results.begin(), results.end(), [](const auto& r) { return r.correct.has_value(); });
    if (labelled) {
        splits.push_back({"correct", true});
        splits.push_back({"incorrect", false});
    }

    std::vector<SummaryRow> rows;
    for (const auto& split : splits) {
        std::vector<const SweepResult*> members;
        for (const auto& r : results)
            if (!split.correct || r.correct == split.correct) members.push_back(&r);
        if (split.correct && members.empty()) continue;
        for (Method method : {Method::winsor, Method::final_layer, Method::naive_mean}) {
            for (const char* metric : {"iou", "com_distance_px"}) {
                const bool is_iou = std::string_view(metric) == "iou";
                std::vector<double> xs;
                for (const auto* r : members) {
                    const EvalRecord& rec = method == Method::winsor ? (is_iou ? r->best_iou() : r->best_com())
                                                                     : r->baseline(method);
                    xs.push_back(is_iou ? rec.iou : rec.com_distance_px);
                }
                const Stats s = population_stats(xs);
                rows.push_back({split.name, method, metric, s.mean, s.stddev, xs.size()});
            }
        }
    }
    return rows;
}

std::string format_real(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
    return std::string(buf, ptr);
}

namespace {

json record_to_json(const EvalRecord& r) {
    return {{"bundle_id", r.bundle_id},
            {"method", to_string(r.method)},
            {"aggregation", to_string(r.aggregation)},
            {"interp", to_string(r.interp)},
            {"p", r.p ? json(*r.p) : json(nullptr)},
            {"iou", r.iou},
            {"com_distance_px", r.com_distance_px},
            {"best_iou", r.best_iou},
            {"best_com", r.best_com}};
}

}  // namespace

std::string records_csv(std::span<const SweepResult> results) {
    std::ostringstream os;
    os << "bundle_id,method,aggregation,interp,p,iou,com_distance_px,best_iou,best_com\n";
    for (const auto& result : results) {
        for (const auto& r : result.records) {
            os << r.bundle_id << ',' << to_string(r.method) << ',' << to_string(r.aggregation) << ','
               << to_string(r.interp) << ',' << (r.p ? format_real(*r.p) : std::string()) << ','
               << format_real(r.iou) << ',' << format_real(r.com_distance_px) << ','
               << (r.best_iou ? "true" : "false") << ',' << (r.best_com ? "true" : "false") << '\n';
        }
    }
    return os.str();
}

json records_json(std::span<const SweepResult> results) {
    json out = json::array();
    for (const auto& result : results)
        for (const auto& r : result.records) out.push_back(record_to_json(r));
    return out;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
    std::ostringstream os;
    os << "split,method,metric,mean,stddev,count\n";
    for (const auto& r : rows) {
        os << r.split << ',' << to_string(r.method) << ',' << r.metric << ',' << format_real(r.mean) << ','
           << format_real(r.stddev) << ',' << r.count << '\n';
    }
    return os.str();
}

json summary_json(std::span<const SummaryRow> rows) {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"split", r.split},
                       {"method", to_string(r.method)},
                       {"metric", r.metric},
                       {"mean", r.mean},
                       {"stddev", r.stddev},
                       {"count", r.count}});
    }
    return out;
}

std::string summary_table(std::span<const SummaryRow> rows) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %-12s %-16s %-22s %s\n", "split", "method", "metric", "mean +/- std", "n");
    os << line;
    for (const auto& r : rows) {
        char cell[48];
        std::snprintf(cell, sizeof cell, "%.4f +/- %.4f", r.mean, r.stddev);
        std::snprintf(line, sizeof line, "%-10s %-12s %-16s %-22s %zu\n", r.split.c_str(),
                      std::string(to_string(r.method)).c_str(), r.metric.c_str(), cell, r.count);
        os << line;
    }
    return os.str();
}

}  // namespace winsorcam
