#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rulforge/model.hpp"
#include "rulforge/preprocess.hpp"

namespace rulforge {

double rmse(std::span<const double> truth, std::span<const double> pred);
double mae(std::span<const double> truth, std::span<const double> pred);
// 1 - SSE/SST about the truth mean; ContractError when the truth has no
// variance.
double r2(std::span<const double> truth, std::span<const double> pred);

struct UnitResult {
    std::uint32_t unit = 0;
    double true_rul = 0.0;
    double pred_rul = 0.0;
};

// One prediction per test unit plus the metrics over them, on both the
// cycles scale and (for MAE) the normalized RUL/cap scale.
struct EvaluationReport {
    std::string subset;
    std::string variant;
    double rmse_cycles = 0.0;
    double mae_cycles = 0.0;
    double mae_normalized = 0.0;
    double r2_score = 0.0;
    std::vector<UnitResult> per_unit;
    std::string config_digest;
    std::uint64_t seed = 0;
};

// Scores an already-windowed test batch; labels are mapped back to cycles by
// the cap, one result per window.
EvaluationReport evaluate_batch(const Checkpoint& ckpt,
                                const WindowBatch& batch,
                                const std::string& subset,
                                double cap = kRulCap,
                                std::size_t workers = 1);

// Last-window prediction per test unit vs the capped terminal RUL.
EvaluationReport evaluate_test(const Checkpoint& ckpt,
                               const FittedPipeline& pipeline,
                               const std::vector<EngineTrajectory>& test,
                               std::span<const std::uint32_t> offsets,
                               std::size_t workers = 1);

std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);

// Header unit_id,true_rul,pred_rul; one row per unit in report order.
std::string predictions_csv(const EvaluationReport& report);
// Same columns prefixed by a rank index, sorted by true RUL descending; the
// series behind the true-vs-predicted plot.
std::string fig_series_csv(const EvaluationReport& report);

// Writes {subset}_{variant}_report.json for "json", the predictions and
// figure-series CSVs for "csv", or all three for "all"; returns the paths
// written. UsageError on other formats.
std::vector<std::string> emit_report(const EvaluationReport& report,
                                     const std::string& out_dir,
                                     const std::string& format);

}  // namespace rulforge
