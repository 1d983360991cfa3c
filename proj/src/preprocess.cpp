#include "rulforge/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rulforge/errors.hpp"
#include "rulforge/kmeans.hpp"
#include "rulforge/rng.hpp"

namespace rulforge {

namespace {

constexpr double kConstantSigma = 1e-8;

Tensor settings_matrix(const EngineTrajectory& traj) {
    Tensor m({traj.length(), kSettingCount});
    for (std::size_t t = 0; t < traj.length(); ++t) {
        for (std::size_t j = 0; j < kSettingCount; ++j) {
            m.at(t, j) = traj.settings[t][j];
        }
    }
    return m;
}

Tensor sensors_matrix(const EngineTrajectory& traj) {
    Tensor m({traj.length(), kSensorCount});
    for (std::size_t t = 0; t < traj.length(); ++t) {
        for (std::size_t j = 0; j < kSensorCount; ++j) {
            m.at(t, j) = traj.sensors[t][j];
        }
    }
    return m;
}

double zscore_one(const ZScoreStats& stats, std::size_t channel, double x) {
    double sigma = stats.stddev[channel];
    if (sigma < kConstantSigma) return 0.0;
    return (x - stats.mean[channel]) / sigma;
}

}  // namespace

ZScoreStats fit_zscore(const Tensor& columns) {
    if (columns.rank() != 2) {
        throw DimensionError("fit_zscore expects a matrix, got " +
                             shape_str(columns.shape()));
    }
    const std::size_t n = columns.rows();
    const std::size_t c = columns.cols();
    if (n == 0) throw ContractError("fit_zscore: empty training data");

    ZScoreStats stats;
    stats.mean.assign(c, 0.0);
    stats.stddev.assign(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += columns.at(r, j);
        double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            double d = columns.at(r, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);  // population variance
        stats.mean[j] = mean;
        stats.stddev[j] = std::sqrt(var);
    }
    return stats;
}

Tensor apply_zscore(const ZScoreStats& stats, const Tensor& columns) {
    if (columns.rank() != 2) {
        throw DimensionError("apply_zscore expects a matrix, got " +
                             shape_str(columns.shape()));
    }
    if (columns.cols() != stats.mean.size()) {
        throw DimensionError("apply_zscore: stats cover " +
                             std::to_string(stats.mean.size()) +
                             " channels, data has " +
                             std::to_string(columns.cols()));
    }
    Tensor out({columns.rows(), columns.cols()});
    for (std::size_t r = 0; r < columns.rows(); ++r) {
        for (std::size_t j = 0; j < columns.cols(); ++j) {
            out.at(r, j) = zscore_one(stats, j, columns.at(r, j));
        }
    }
    return out;
}

std::vector<double> compute_rul(const EngineTrajectory& trajectory,
                                double terminal_offset, double cap) {
    const std::size_t n = trajectory.length();
    for (std::size_t t = 0; t < n; ++t) {
        if (trajectory.cycles[t] != t + 1) {
            throw DataError("unit " + std::to_string(trajectory.unit) +
                            ": cycles are not contiguous from 1");
        }
    }
    std::vector<double> rul(n);
    const double final_cycle = static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
        double cycle = static_cast<double>(t + 1);
        double raw = std::max(0.0, final_cycle - cycle + terminal_offset);
        rul[t] = std::min(raw, cap);
    }
    return rul;
}

std::vector<double> ewma_smooth(std::span<const double> series, double beta) {
    if (series.empty()) throw ContractError("ewma_smooth: empty series");
    std::vector<double> out(series.size());
    out[0] = series[0];
    for (std::size_t t = 1; t < series.size(); ++t) {
        out[t] = beta * out[t - 1] + (1.0 - beta) * series[t];
    }
    return out;
}

FittedPipeline fit_pipeline(const PipelineConfig& config,
                            const std::vector<EngineTrajectory>& train) {
    if (train.empty()) throw ContractError("fit_pipeline: no training units");
    if (config.window == 0) throw ConfigError("window length must be positive");
    if (config.rul_cap <= 0.0) throw ConfigError("RUL cap must be positive");
    if (config.multi_condition && config.regimes == 0) {
        throw ConfigError("multi-condition mode needs at least one regime");
    }

    std::size_t total_rows = 0;
    for (const EngineTrajectory& traj : train) total_rows += traj.length();

    Tensor settings({total_rows, kSettingCount});
    Tensor sensors({total_rows, kSensorCount});
    std::vector<double> labels(total_rows);
    std::size_t row = 0;
    for (const EngineTrajectory& traj : train) {
        std::vector<double> rul = compute_rul(traj, 0.0, config.rul_cap);
        for (std::size_t t = 0; t < traj.length(); ++t, ++row) {
            for (std::size_t j = 0; j < kSettingCount; ++j) {
                settings.at(row, j) = traj.settings[t][j];
            }
            for (std::size_t j = 0; j < kSensorCount; ++j) {
                sensors.at(row, j) = traj.sensors[t][j];
            }
            labels[row] = rul[t];
        }
    }

    FittedPipeline pipe;
    pipe.config = config;
    pipe.setting_stats = fit_zscore(settings);

    Rng seeds(config.seed);
    const std::uint64_t kmeans_seed = seeds.next_u64();
    const std::uint64_t forest_seed = seeds.next_u64();

    Tensor normalized({total_rows, kSensorCount});
    if (config.multi_condition) {
        Tensor std_settings = apply_zscore(pipe.setting_stats, settings);
        KMeansResult km =
            kmeans_fit(std_settings, config.regimes, kmeans_seed);

        RegimeModel model;
        model.centroids = km.centroids;
        for (std::size_t c = 0; c < config.regimes; ++c) {
            std::size_t members = 0;
            for (std::uint32_t a : km.assignment) {
                if (a == c) ++members;
            }
            if (members == 0) {
                throw DataError("regime " + std::to_string(c) +
                                " is empty after clustering; re-fit with a "
                                "different seed");
            }
            Tensor regime_rows({members, kSensorCount});
            std::size_t out_r = 0;
            for (std::size_t r = 0; r < total_rows; ++r) {
                if (km.assignment[r] != c) continue;
                for (std::size_t j = 0; j < kSensorCount; ++j) {
                    regime_rows.at(out_r, j) = sensors.at(r, j);
                }
                ++out_r;
            }
            model.sensor_stats.push_back(fit_zscore(regime_rows));
        }
        pipe.regimes = std::move(model);

        for (std::size_t r = 0; r < total_rows; ++r) {
            const ZScoreStats& stats =
                pipe.regimes->sensor_stats[km.assignment[r]];
            for (std::size_t j = 0; j < kSensorCount; ++j) {
                normalized.at(r, j) = zscore_one(stats, j, sensors.at(r, j));
            }
        }
    } else {
        pipe.sensor_stats = fit_zscore(sensors);
        normalized = apply_zscore(pipe.sensor_stats, sensors);
    }

    ForestConfig forest;
    forest.seed = forest_seed;
    pipe.selection = rf_feature_select(normalized, labels, forest);
    return pipe;
}

Tensor normalize_sensors(const FittedPipeline& pipeline,
                         const EngineTrajectory& trajectory) {
    Tensor sensors = sensors_matrix(trajectory);
    if (!pipeline.config.multi_condition) {
        return apply_zscore(pipeline.sensor_stats, sensors);
    }
    if (!pipeline.regimes.has_value()) {
        throw ContractError("multi-condition pipeline has no regime model");
    }
    Tensor std_settings =
        apply_zscore(pipeline.setting_stats, settings_matrix(trajectory));
    Tensor out({sensors.rows(), kSensorCount});
    for (std::size_t r = 0; r < sensors.rows(); ++r) {
        std::uint32_t regime = kmeans_assign(
            pipeline.regimes->centroids,
            std::span<const double>(&std_settings.data()[r * kSettingCount],
                                    kSettingCount));
        const ZScoreStats& stats = pipeline.regimes->sensor_stats[regime];
        for (std::size_t j = 0; j < kSensorCount; ++j) {
            out.at(r, j) = zscore_one(stats, j, sensors.at(r, j));
        }
    }
    return out;
}

WindowBatch build_windows(const FittedPipeline& pipeline,
                          const std::vector<EngineTrajectory>& trajectories,
                          std::span<const std::uint32_t> offsets,
                          bool test_mode) {
    if (!offsets.empty() && offsets.size() != trajectories.size()) {
        throw DimensionError("build_windows: " +
                             std::to_string(trajectories.size()) +
                             " units but " + std::to_string(offsets.size()) +
                             " terminal offsets");
    }
    const std::size_t window = pipeline.config.window;
    const std::size_t width = pipeline.feature_width();
    const std::size_t retained = pipeline.selection.retained.size();

    // per-unit feature rows and labels, after the warmup drop
    std::vector<Tensor> unit_rows;
    std::vector<std::vector<double>> unit_labels;
    std::vector<std::vector<std::uint32_t>> unit_cycles;
    std::size_t window_count = 0;

    for (std::size_t u = 0; u < trajectories.size(); ++u) {
        const EngineTrajectory& traj = trajectories[u];
        const std::size_t n = traj.length();
        double offset = offsets.empty() ? 0.0 : offsets[u];
        std::vector<double> rul =
            compute_rul(traj, offset, pipeline.config.rul_cap);

        Tensor std_settings =
            apply_zscore(pipeline.setting_stats, settings_matrix(traj));
        Tensor norm = normalize_sensors(pipeline, traj);

        // smooth each retained channel across the full unit history
        Tensor smooth({n, retained});
        std::vector<double> series(n);
        for (std::size_t k = 0; k < retained; ++k) {
            std::size_t j = pipeline.selection.retained[k];
            for (std::size_t t = 0; t < n; ++t) series[t] = norm.at(t, j);
            std::vector<double> sm =
                ewma_smooth(series, pipeline.config.ewma_beta);
            for (std::size_t t = 0; t < n; ++t) smooth.at(t, k) = sm[t];
        }

        std::size_t kept = 0;
        for (std::size_t t = 0; t < n; ++t) {
            if (traj.cycles[t] > pipeline.config.warmup_cutoff) ++kept;
        }
        if (kept == 0) {
            throw DataError("unit " + std::to_string(traj.unit) +
                            " has no cycles past the warmup cutoff");
        }

        Tensor rows({kept, width});
        std::vector<double> kept_labels(kept);
        std::vector<std::uint32_t> kept_cycles(kept);
        std::size_t out_t = 0;
        for (std::size_t t = 0; t < n; ++t) {
            if (traj.cycles[t] <= pipeline.config.warmup_cutoff) continue;
            for (std::size_t j = 0; j < kSettingCount; ++j) {
                rows.at(out_t, j) = std_settings.at(t, j);
            }
            for (std::size_t k = 0; k < retained; ++k) {
                rows.at(out_t, kSettingCount + k) =
                    norm.at(t, pipeline.selection.retained[k]);
                rows.at(out_t, kSettingCount + retained + k) = smooth.at(t, k);
            }
            kept_labels[out_t] = rul[t] / pipeline.config.rul_cap;
            kept_cycles[out_t] = traj.cycles[t];
            ++out_t;
        }

        if (test_mode) {
            window_count += 1;
        } else if (kept >= window) {
            window_count += kept - window + 1;
        }
        unit_rows.push_back(std::move(rows));
        unit_labels.push_back(std::move(kept_labels));
        unit_cycles.push_back(std::move(kept_cycles));
    }

    WindowBatch batch;
    batch.inputs = Tensor({window_count, window, width});
    batch.labels.reserve(window_count);
    batch.units.reserve(window_count);
    batch.end_cycles.reserve(window_count);

    std::size_t b = 0;
    auto emit = [&](std::size_t u, std::size_t end) {
        const Tensor& rows = unit_rows[u];
        const std::size_t kept = rows.rows();
        double* dst = &batch.inputs.data()[b * window * width];
        for (std::size_t w = 0; w < window; ++w) {
            // negative reach repeats the earliest row (test-mode padding)
            std::size_t src = end + 1 + w >= window ? end + 1 + w - window : 0;
            if (src >= kept) src = kept - 1;
            for (std::size_t j = 0; j < width; ++j) {
                dst[w * width + j] = rows.at(src, j);
            }
        }
        batch.labels.push_back(unit_labels[u][end]);
        batch.units.push_back(trajectories[u].unit);
        batch.end_cycles.push_back(unit_cycles[u][end]);
        ++b;
    };

    for (std::size_t u = 0; u < trajectories.size(); ++u) {
        const std::size_t kept = unit_rows[u].rows();
        if (test_mode) {
            emit(u, kept - 1);
        } else if (kept >= window) {
            for (std::size_t end = window - 1; end < kept; ++end) {
                emit(u, end);
            }
        }
    }

    validate(batch);
    return batch;
}

std::pair<WindowBatch, WindowBatch> split_train_val(const WindowBatch& batch,
                                                    double ratio,
                                                    std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0) {
        throw ConfigError("split ratio must lie strictly between 0 and 1");
    }
    std::vector<std::uint32_t> unit_ids;
    for (std::uint32_t u : batch.units) {
        if (std::find(unit_ids.begin(), unit_ids.end(), u) == unit_ids.end()) {
            unit_ids.push_back(u);
        }
    }
    if (unit_ids.size() < 5) {
        throw ContractError("split_train_val: need at least 5 units, got " +
                            std::to_string(unit_ids.size()));
    }

    Rng rng(seed);
    rng.shuffle(unit_ids);
    auto train_units = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(unit_ids.size())));
    train_units = std::clamp<std::size_t>(train_units, 1, unit_ids.size() - 1);

    std::vector<bool> in_train(batch.count(), false);
    for (std::size_t b = 0; b < batch.count(); ++b) {
        for (std::size_t i = 0; i < train_units; ++i) {
            if (batch.units[b] == unit_ids[i]) {
                in_train[b] = true;
                break;
            }
        }
    }

    auto take = [&](bool want_train) {
        WindowBatch out;
        std::size_t count = 0;
        for (std::size_t b = 0; b < batch.count(); ++b) {
            if (in_train[b] == want_train) ++count;
        }
        const std::size_t w = batch.window();
        const std::size_t f = batch.features();
        out.inputs = Tensor({count, w, f});
        std::size_t next = 0;
        for (std::size_t b = 0; b < batch.count(); ++b) {
            if (in_train[b] != want_train) continue;
            std::copy_n(&batch.inputs.data()[b * w * f], w * f,
                        &out.inputs.data()[next * w * f]);
            out.labels.push_back(batch.labels[b]);
            out.units.push_back(batch.units[b]);
            out.end_cycles.push_back(batch.end_cycles[b]);
            ++next;
        }
        return out;
    };
    return {take(true), take(false)};
}

namespace {

nlohmann::json stats_to_json(const ZScoreStats& stats) {
    return {{"mean", stats.mean}, {"stddev", stats.stddev}};
}

ZScoreStats stats_from_json(const nlohmann::json& j) {
    ZScoreStats stats;
    stats.mean = j.at("mean").get<std::vector<double>>();
    stats.stddev = j.at("stddev").get<std::vector<double>>();
    if (stats.mean.size() != stats.stddev.size()) {
        throw DataError("pipeline stats: mean/stddev length mismatch");
    }
    return stats;
}

}  // namespace

std::string pipeline_to_json(const FittedPipeline& pipeline) {
    nlohmann::json j;
    j["format"] = "rulforge-pipeline";
    j["version"] = 1;
    j["mode"] = pipeline.config.multi_condition ? "multi-condition"
                                                : "single-condition";
    j["config"] = {{"subset", pipeline.config.subset},
                   {"multi_condition", pipeline.config.multi_condition},
                   {"regimes", pipeline.config.regimes},
                   {"seed", pipeline.config.seed},
                   {"ewma_beta", pipeline.config.ewma_beta},
                   {"window", pipeline.config.window},
                   {"warmup_cutoff", pipeline.config.warmup_cutoff},
                   {"rul_cap", pipeline.config.rul_cap}};
    j["setting_stats"] = stats_to_json(pipeline.setting_stats);
    if (pipeline.config.multi_condition) {
        const RegimeModel& model = pipeline.regimes.value();
        nlohmann::json centroids = nlohmann::json::array();
        for (std::size_t c = 0; c < model.centroids.rows(); ++c) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t d = 0; d < model.centroids.cols(); ++d) {
                row.push_back(model.centroids.at(c, d));
            }
            centroids.push_back(std::move(row));
        }
        nlohmann::json stats = nlohmann::json::array();
        for (const ZScoreStats& s : model.sensor_stats) {
            stats.push_back(stats_to_json(s));
        }
        j["regime_model"] = {{"centroids", std::move(centroids)},
                             {"sensor_stats", std::move(stats)}};
    } else {
        j["sensor_stats"] = stats_to_json(pipeline.sensor_stats);
    }
    j["selection"] = {{"importance", pipeline.selection.importance},
                      {"retained", pipeline.selection.retained},
                      {"threshold", pipeline.selection.threshold}};
    return j.dump(2) + "\n";
}

FittedPipeline pipeline_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("pipeline JSON parse failed: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "rulforge-pipeline") {
            throw DataError("not a pipeline file");
        }
        if (j.at("version").get<int>() != 1) {
            throw DataError("unsupported pipeline version");
        }
        FittedPipeline pipe;
        const auto& c = j.at("config");
        pipe.config.subset = c.at("subset").get<std::string>();
        pipe.config.multi_condition = c.at("multi_condition").get<bool>();
        pipe.config.regimes = c.at("regimes").get<std::size_t>();
        pipe.config.seed = c.at("seed").get<std::uint64_t>();
        pipe.config.ewma_beta = c.at("ewma_beta").get<double>();
        pipe.config.window = c.at("window").get<std::size_t>();
        pipe.config.warmup_cutoff = c.at("warmup_cutoff").get<std::size_t>();
        pipe.config.rul_cap = c.at("rul_cap").get<double>();
        pipe.setting_stats = stats_from_json(j.at("setting_stats"));
        if (pipe.config.multi_condition) {
            const auto& m = j.at("regime_model");
            const auto& rows = m.at("centroids");
            RegimeModel model;
            model.centroids =
                Tensor({rows.size(), rows.empty() ? 0 : rows[0].size()});
            for (std::size_t r = 0; r < rows.size(); ++r) {
                for (std::size_t d = 0; d < rows[r].size(); ++d) {
                    model.centroids.at(r, d) = rows[r][d].get<double>();
                }
            }
            for (const auto& s : m.at("sensor_stats")) {
                model.sensor_stats.push_back(stats_from_json(s));
            }
            if (model.sensor_stats.size() != model.centroids.rows()) {
                throw DataError("pipeline: regime count mismatch");
            }
            pipe.regimes = std::move(model);
        } else {
            pipe.sensor_stats = stats_from_json(j.at("sensor_stats"));
        }
        const auto& sel = j.at("selection");
        pipe.selection.importance =
            sel.at("importance").get<std::vector<double>>();
        pipe.selection.retained =
            sel.at("retained").get<std::vector<std::size_t>>();
        pipe.selection.threshold = sel.at("threshold").get<double>();
        return pipe;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("pipeline JSON invalid: ") + e.what());
    }
}

void save_pipeline(const std::string& path, const FittedPipeline& pipeline) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << pipeline_to_json(pipeline);
    if (!out) throw IoError("write failed for " + path);
}

FittedPipeline load_pipeline(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return pipeline_from_json(buf.str());
}

}  // namespace rulforge
