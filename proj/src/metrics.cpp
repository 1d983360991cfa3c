#include "rulforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rulforge/errors.hpp"
#include "rulforge/serialize.hpp"
#include "rulforge/training.hpp"

namespace rulforge {

namespace {

void check_pair(std::span<const double> truth, std::span<const double> pred,
                const char* name) {
    if (truth.empty()) {
        throw ContractError(std::string(name) + ": empty input");
    }
    if (truth.size() != pred.size()) {
        throw DimensionError(std::string(name) + ": " +
                             std::to_string(truth.size()) + " truths vs " +
                             std::to_string(pred.size()) + " predictions");
    }
}

}  // namespace

double rmse(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth, pred, "rmse");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double d = truth[i] - pred[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(truth.size()));
}

double mae(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth, pred, "mae");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        sum += std::abs(truth[i] - pred[i]);
    }
    return sum / static_cast<double>(truth.size());
}

double r2(std::span<const double> truth, std::span<const double> pred) {
    check_pair(truth, pred, "r2");
    double mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double e = truth[i] - pred[i];
        double d = truth[i] - mean;
        sse += e * e;
        sst += d * d;
    }
    if (sst <= 0.0) {
        throw ContractError("r2: truth values have no variance");
    }
    return 1.0 - sse / sst;
}

EvaluationReport evaluate_batch(const Checkpoint& ckpt,
                                const WindowBatch& batch,
                                const std::string& subset, double cap,
                                std::size_t workers) {
    std::vector<double> pred = predict_batch(ckpt, batch.inputs, workers);

    EvaluationReport report;
    report.subset = subset;
    report.variant = variant_name(ckpt.config);
    report.config_digest = config_digest(ckpt.config);
    report.seed = ckpt.config.seed;

    std::vector<double> truth(batch.count());
    for (std::size_t i = 0; i < batch.count(); ++i) {
        truth[i] = batch.labels[i] * cap;
        report.per_unit.push_back({batch.units[i], truth[i], pred[i]});
    }
    report.rmse_cycles = rmse(truth, pred);
    report.mae_cycles = mae(truth, pred);
    report.mae_normalized = report.mae_cycles / cap;
    report.r2_score = r2(truth, pred);
    return report;
}

EvaluationReport evaluate_test(const Checkpoint& ckpt,
                               const FittedPipeline& pipeline,
                               const std::vector<EngineTrajectory>& test,
                               std::span<const std::uint32_t> offsets,
                               std::size_t workers) {
    WindowBatch batch = build_windows(pipeline, test, offsets, true);
    return evaluate_batch(ckpt, batch, pipeline.config.subset,
                          pipeline.config.rul_cap, workers);
}

std::string report_to_json(const EvaluationReport& report) {
    nlohmann::json j;
    j["format"] = "rulforge-report";
    j["version"] = 1;
    j["subset"] = report.subset;
    j["variant"] = report.variant;
    j["config_digest"] = report.config_digest;
    j["seed"] = report.seed;
    j["metrics"] = {{"rmse_cycles", report.rmse_cycles},
                    {"mae_cycles", report.mae_cycles},
                    {"mae_normalized", report.mae_normalized},
                    {"r2", report.r2_score}};
    nlohmann::json units = nlohmann::json::array();
    for (const UnitResult& u : report.per_unit) {
        units.push_back({{"unit", u.unit},
                         {"true_rul", u.true_rul},
                         {"pred_rul", u.pred_rul}});
    }
    j["per_unit"] = std::move(units);
    return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report JSON parse failed: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "rulforge-report") {
            throw DataError("not a report file");
        }
        EvaluationReport report;
        report.subset = j.at("subset").get<std::string>();
        report.variant = j.at("variant").get<std::string>();
        report.config_digest = j.at("config_digest").get<std::string>();
        report.seed = j.at("seed").get<std::uint64_t>();
        const auto& m = j.at("metrics");
        report.rmse_cycles = m.at("rmse_cycles").get<double>();
        report.mae_cycles = m.at("mae_cycles").get<double>();
        report.mae_normalized = m.at("mae_normalized").get<double>();
        report.r2_score = m.at("r2").get<double>();
        for (const auto& u : j.at("per_unit")) {
            report.per_unit.push_back({u.at("unit").get<std::uint32_t>(),
                                       u.at("true_rul").get<double>(),
                                       u.at("pred_rul").get<double>()});
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report JSON invalid: ") + e.what());
    }
}

std::string predictions_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "unit_id,true_rul,pred_rul\n";
    for (const UnitResult& u : report.per_unit) {
        out << u.unit << ',' << g17(u.true_rul) << ',' << g17(u.pred_rul)
            << '\n';
    }
    return out.str();
}

std::string fig_series_csv(const EvaluationReport& report) {
    std::vector<UnitResult> sorted = report.per_unit;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const UnitResult& a, const UnitResult& b) {
                         return a.true_rul > b.true_rul;
                     });
    std::ostringstream out;
    out << "rank,unit_id,true_rul,pred_rul\n";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        out << i << ',' << sorted[i].unit << ',' << g17(sorted[i].true_rul)
            << ',' << g17(sorted[i].pred_rul) << '\n';
    }
    return out.str();
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::vector<std::string> emit_report(const EvaluationReport& report,
                                     const std::string& out_dir,
                                     const std::string& format) {
    if (format != "json" && format != "csv" && format != "all") {
        throw UsageError("unknown report format '" + format +
                         "' (expected json, csv, or all)");
    }
    const std::string stem =
        out_dir + "/" + report.subset + "_" + report.variant;
    std::vector<std::string> written;
    if (format == "json" || format == "all") {
        written.push_back(stem + "_report.json");
        write_text(written.back(), report_to_json(report));
    }
    if (format == "csv" || format == "all") {
        written.push_back(stem + "_predictions.csv");
        write_text(written.back(), predictions_csv(report));
        written.push_back(stem + "_fig2_series.csv");
        write_text(written.back(), fig_series_csv(report));
    }
    return written;
}

}  // namespace rulforge
