#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "rulforge/cli.hpp"
#include "rulforge/metrics.hpp"
#include "rulforge/model.hpp"
#include "rulforge/preprocess.hpp"
#include "rulforge/training.hpp"
#include "rulforge/windows.hpp"

namespace py = pybind11;
using namespace rulforge;

PYBIND11_MODULE(_core, m) {
    m.doc() = "RUL estimation core: condition-aware preprocessing, "
              "bidirectional LSTM with residual correction, evaluation.";
    m.attr("__version__") = "0.1.0";

    m.def(
        "run",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"),
        "Run one CLI subcommand in-process. Returns (exit_code, stdout, "
        "stderr).");

    m.def(
        "ewma_smooth",
        [](const std::vector<double>& series, double beta) {
            return ewma_smooth(series, beta);
        },
        py::arg("series"), py::arg("beta") = 0.98,
        "First-order exponential smoothing; out[0] = series[0].");

    m.def(
        "rmse",
        [](const std::vector<double>& truth, const std::vector<double>& pred) {
            return rmse(truth, pred);
        },
        py::arg("truth"), py::arg("pred"));
    m.def(
        "mae",
        [](const std::vector<double>& truth, const std::vector<double>& pred) {
            return mae(truth, pred);
        },
        py::arg("truth"), py::arg("pred"));
    m.def(
        "r2",
        [](const std::vector<double>& truth, const std::vector<double>& pred) {
            return r2(truth, pred);
        },
        py::arg("truth"), py::arg("pred"),
        "1 - SSE/SST about the truth mean.");

    m.def(
        "predict",
        [](const std::string& checkpoint_path, const std::string& windows_path,
           std::size_t workers) {
            const Checkpoint ckpt = load_checkpoint(checkpoint_path);
            const WindowBatch batch = load_windows(windows_path);
            return predict_batch(ckpt, batch.inputs, workers);
        },
        py::arg("checkpoint_path"), py::arg("windows_path"),
        py::arg("workers") = 1,
        "RUL prediction in cycles, clamped to [0, 125], per window in the "
        "batch file.");

    m.def(
        "evaluate",
        [](const std::string& checkpoint_path, const std::string& windows_path,
           const std::string& subset, std::size_t workers) {
            const Checkpoint ckpt = load_checkpoint(checkpoint_path);
            const WindowBatch batch = load_windows(windows_path);
            return report_to_json(
                evaluate_batch(ckpt, batch, subset, kRulCap, workers));
        },
        py::arg("checkpoint_path"), py::arg("windows_path"), py::arg("subset"),
        py::arg("workers") = 1,
        "Score a windowed test batch; returns the evaluation report as a "
        "JSON string.");
}
