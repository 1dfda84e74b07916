#pragma once

// p-sweeps against ground-truth masks and dataset-level summaries.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "winsorcam/pipeline.hpp"

namespace winsorcam {

// 0, 10, ..., 100
std::vector<double> default_p_grid();

// "start:stop:step" (inclusive stop) or a comma-separated list. Every value
// must lie in [0, 100]; duplicates are rejected.
std::vector<double> parse_p_grid(std::string_view text);

struct SweepConfig {
    std::vector<double> p_grid = default_p_grid();
    Aggregation aggregation = Aggregation::mean;
    Interp interp = Interp::bilinear;
    Bounds bounds{};
    RangeSource range_source = RangeSource::pre_clip;
};

struct EvalRecord {
    std::string bundle_id;
    Method method = Method::winsor;
    Aggregation aggregation = Aggregation::mean;
    Interp interp = Interp::bilinear;
    std::optional<double> p;  // winsor rows only
    double iou = 0.0;
    double com_distance_px = 0.0;
    bool best_iou = false;    // highest IoU over the grid, lowest p on ties
    bool best_com = false;    // lowest CoM distance over the grid, lowest p on ties
};

struct SweepResult {
    std::string bundle_id;
    std::optional<bool> correct;
    std::vector<EvalRecord> records;  // winsor rows in grid order, then final_layer, naive_mean

    const EvalRecord& best_iou() const;
    const EvalRecord& best_com() const;
    const EvalRecord& baseline(Method method) const;
};

// Throws std::invalid_argument when the bundle has no mask.
SweepResult sweep(const PreparedBundle& prepared, const SweepConfig& config);

struct SummaryRow {
    std::string split;   // all | correct | incorrect
    Method method = Method::winsor;
    std::string metric;  // iou | com_distance_px
    double mean = 0.0;
    double stddev = 0.0; // population
    std::size_t count = 0;
};

// Winsor-CAM contributes its best-over-p value per bundle. The correct and
// incorrect splits appear only when at least one bundle falls into them.
std::vector<SummaryRow> summarize(std::span<const SweepResult> results);

// Shortest decimal that round-trips to the same double.
std::string format_real(double value);

std::string records_csv(std::span<const SweepResult> results);
nlohmann::json records_json(std::span<const SweepResult> results);
std::string summary_csv(std::span<const SummaryRow> rows);
nlohmann::json summary_json(std::span<const SummaryRow> rows);
std::string summary_table(std::span<const SummaryRow> rows);

}  // namespace winsorcam
