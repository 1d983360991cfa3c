#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rulforge/cmapss.hpp"
#include "rulforge/random_forest.hpp"
#include "rulforge/tensor.hpp"
#include "rulforge/windows.hpp"

namespace rulforge {

// Per-channel standardization parameters, fitted on training rows only.
// Channels with stddev below 1e-8 are treated as constant and map to 0.
struct ZScoreStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

ZScoreStats fit_zscore(const Tensor& columns);
Tensor apply_zscore(const ZScoreStats& stats, const Tensor& columns);

// Operating-regime clustering over standardized settings plus one set of
// sensor statistics per regime.
struct RegimeModel {
    Tensor centroids;  // k x 3
    std::vector<ZScoreStats> sensor_stats;
};

struct PipelineConfig {
    std::string subset = "FD001";
    bool multi_condition = false;
    std::size_t regimes = 6;
    std::uint64_t seed = 42;
    double ewma_beta = 0.98;
    std::size_t window = 15;
    std::size_t warmup_cutoff = 10;
    double rul_cap = kRulCap;
};

// Everything needed to turn raw trajectories into model-ready windows.
// Fitting reads training data only; applying it never mutates it.
struct FittedPipeline {
    PipelineConfig config;
    ZScoreStats setting_stats;
    ZScoreStats sensor_stats;            // single-condition mode
    std::optional<RegimeModel> regimes;  // multi-condition mode
    FeatureSelection selection;

    std::size_t feature_width() const {
        return kSettingCount + 2 * selection.retained.size();
    }
};

// RUL per cycle: max(0, T - t + terminal_offset), capped. The offset is 0
// for run-to-failure training units and the provided terminal value for
// truncated test units. DataError when cycles are not 1..T contiguous.
std::vector<double> compute_rul(const EngineTrajectory& trajectory,
                                double terminal_offset,
                                double cap = kRulCap);

// First-order exponential smoothing: out[0] = x[0],
// out[t] = beta*out[t-1] + (1-beta)*x[t]. Never crosses unit boundaries.
std::vector<double> ewma_smooth(std::span<const double> series, double beta);

FittedPipeline fit_pipeline(const PipelineConfig& config,
                            const std::vector<EngineTrajectory>& train);

// All 21 sensor channels standardized: globally in single-condition mode,
// per assigned regime otherwise.
Tensor normalize_sensors(const FittedPipeline& pipeline,
                         const EngineTrajectory& trajectory);

// Assembles [settings | retained sensors | smoothed retained sensors] rows,
// drops cycles <= warmup cutoff, then windows. Training mode emits every
// full window per unit; test mode emits only the final window, left-padded
// with the earliest remaining row when the unit is short. `offsets` is the
// per-unit terminal RUL list (empty means all zero).
WindowBatch build_windows(const FittedPipeline& pipeline,
                          const std::vector<EngineTrajectory>& trajectories,
                          std::span<const std::uint32_t> offsets,
                          bool test_mode);

// Unit-level split: shuffles unit ids with Rng(seed) and sends the first
// `ratio` share to the training side. ContractError below 5 units.
std::pair<WindowBatch, WindowBatch> split_train_val(const WindowBatch& batch,
                                                    double ratio,
                                                    std::uint64_t seed);

std::string pipeline_to_json(const FittedPipeline& pipeline);
FittedPipeline pipeline_from_json(const std::string& text);
void save_pipeline(const std::string& path, const FittedPipeline& pipeline);
FittedPipeline load_pipeline(const std::string& path);

}  // namespace rulforge
