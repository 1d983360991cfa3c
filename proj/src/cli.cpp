#include "rulforge/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rulforge/cmapss.hpp"
#include "rulforge/errors.hpp"
#include "rulforge/metrics.hpp"
#include "rulforge/model.hpp"
#include "rulforge/preprocess.hpp"
#include "rulforge/rng.hpp"
#include "rulforge/serialize.hpp"
#include "rulforge/synthetic.hpp"
#include "rulforge/training.hpp"

namespace rulforge {

namespace {

struct RunConfig {
    std::string subset;     // FD001..FD004, empty when --synthetic is used
    std::string synthetic;  // fleet spec JSON path
    std::string data_dir = ".";
    std::string out_dir = ".";
    std::string variant = "biclstm";
    std::size_t blocks = 4;
    std::size_t hidden = 64;
    std::size_t proj = 64;
    double lr = 1e-3;
    std::size_t batch = 256;
    std::size_t patience = 10;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 42;
    std::string format = "all";
    std::string sweep = "2,4,6,8,10";
    std::size_t workers = 1;
    bool corrupt_gradient = false;  // gradcheck negative-control hook
};

std::size_t resolve_workers() {
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RULFORGE_THREADS")) {
        char* end = nullptr;
        unsigned long v = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0' || v == 0) {
            throw ConfigError("RULFORGE_THREADS must be a positive integer");
        }
        workers = std::min<std::size_t>(workers, v);
    }
    return workers;
}

std::string require_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("missing file " + path);
    return path;
}

// Dataset identity: the subset id, or the name a synthetic spec declares.
std::string dataset_name(const RunConfig& rc) {
    if (!rc.synthetic.empty()) {
        return load_fleet_spec(require_file(rc.synthetic)).name;
    }
    return subset_meta(rc.subset).id;
}

std::string stem(const RunConfig& rc, const std::string& name) {
    return rc.out_dir + "/" + name;
}

struct DataBundle {
    std::string name;
    bool multi = false;
    std::size_t regimes = 6;
    std::vector<EngineTrajectory> train;
    std::vector<EngineTrajectory> test;
    std::vector<std::uint32_t> offsets;
};

DataBundle load_data(const RunConfig& rc, std::ostream& err) {
    DataBundle d;
    if (!rc.synthetic.empty()) {
        FleetSpec spec = load_fleet_spec(require_file(rc.synthetic));
        SyntheticFleet fleet = generate_fleet(spec);
        d.name = spec.name;
        d.multi = spec.regimes > 1;
        d.regimes = std::max<std::size_t>(spec.regimes, 1);
        d.train = std::move(fleet.train);
        d.test = std::move(fleet.test);
        d.offsets = std::move(fleet.test_offsets);
        return d;
    }
    const SubsetMeta meta = subset_meta(rc.subset);
    const std::string train_path = rc.data_dir + "/train_" + meta.id + ".txt";
    const std::string test_path = rc.data_dir + "/test_" + meta.id + ".txt";
    const std::string rul_path = rc.data_dir + "/RUL_" + meta.id + ".txt";
    for (const std::string& p : {train_path, test_path, rul_path}) {
        if (!std::filesystem::exists(p)) throw IoError("missing data file " + p);
    }
    d.name = meta.id;
    d.multi = meta.multi_condition();
    d.train = load_trajectories(train_path);
    d.test = load_trajectories(test_path);
    d.offsets = load_rul_offsets(rul_path, d.test.size());
    for (const std::string& w : validate_fleet(d.train, meta, false)) {
        err << "warning: " << w << "\n";
    }
    for (const std::string& w : validate_fleet(d.test, meta, true)) {
        err << "warning: " << w << "\n";
    }
    return d;
}

ModelConfig model_config(const RunConfig& rc, std::size_t features) {
    ModelConfig m;
    m.input_dim = features;
    m.projection_dim = rc.proj;
    m.hidden_dim = rc.hidden;
    m.num_blocks = rc.blocks;
    apply_variant(m, rc.variant);
    m.seed = rc.seed;
    return m;
}

TrainConfig train_config(const RunConfig& rc) {
    TrainConfig t;
    t.learning_rate = rc.lr;
    t.batch_size = rc.batch;
    t.patience = rc.patience;
    t.max_epochs = rc.max_epochs;
    t.seed = rc.seed;
    t.workers = rc.workers;
    return t;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

int cmd_preprocess(const RunConfig& rc, std::ostream& out, std::ostream& err) {
    DataBundle data = load_data(rc, err);

    PipelineConfig pcfg;
    pcfg.subset = data.name;
    pcfg.multi_condition = data.multi;
    pcfg.regimes = data.regimes;
    pcfg.seed = rc.seed;
    FittedPipeline pipe = fit_pipeline(pcfg, data.train);

    WindowBatch all = build_windows(pipe, data.train, {}, false);
    auto [tr, va] = split_train_val(all, 0.8, rc.seed);
    WindowBatch te = build_windows(pipe, data.test, data.offsets, true);

    const std::string base = stem(rc, data.name);
    save_pipeline(base + "_pipeline.json", pipe);
    save_windows(base + "_train.windows", tr);
    save_windows(base + "_val.windows", va);
    save_windows(base + "_test.windows", te);

    out << "pipeline: " << base + "_pipeline.json" << "\n";
    out << "mode: " << (data.multi ? "multi-condition" : "single-condition")
        << "\n";
    out << "retained sensors: " << pipe.selection.retained.size() << "\n";
    out << "train windows: " << tr.count() << "\n";
    out << "val windows: " << va.count() << "\n";
    out << "test windows: " << te.count() << "\n";
    out << "features: " << all.features() << "\n";
    return 0;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
    const std::string base = stem(rc, dataset_name(rc));
    WindowBatch tr = load_windows(require_file(base + "_train.windows"));
    WindowBatch va = load_windows(require_file(base + "_val.windows"));
    if (tr.features() != va.features()) {
        throw ConfigError("train windows have " + std::to_string(tr.features()) +
                          " features but val windows have " +
                          std::to_string(va.features()));
    }

    ModelConfig mcfg = model_config(rc, tr.features());
    TrainResult res = train(mcfg, tr, va, train_config(rc));
    if (res.diverged) {
        throw NumericError("training loss went non-finite at epoch " +
                           std::to_string(res.history.size()));
    }

    Checkpoint ckpt = res.best;
    nlohmann::json meta;
    meta["dataset"] = dataset_name(rc);
    meta["best_epoch"] = res.best_epoch;
    meta["best_val_rmse_cycles"] = res.best_val_rmse;
    meta["epochs_run"] = res.history.size();
    ckpt.metadata_json = meta.dump();

    const std::string ck_path = base + "_" + rc.variant + "_checkpoint.json";
    const std::string hist_path = base + "_" + rc.variant + "_history.csv";
    save_checkpoint(ck_path, ckpt);
    write_history_csv(hist_path, res.history);

    out << "checkpoint: " << ck_path << "\n";
    out << "history: " << hist_path << "\n";
    out << "variant: " << variant_name(mcfg) << "\n";
    out << "best epoch: " << res.best_epoch << "\n";
    out << "val rmse: " << fmt(res.best_val_rmse) << " cycles\n";
    return 0;
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out) {
    const std::string base = stem(rc, dataset_name(rc));
    FittedPipeline pipe = load_pipeline(require_file(base + "_pipeline.json"));
    Checkpoint ckpt = load_checkpoint(
        require_file(base + "_" + rc.variant + "_checkpoint.json"));
    WindowBatch te = load_windows(require_file(base + "_test.windows"));
    if (ckpt.config.input_dim != te.features()) {
        throw ConfigError("checkpoint expects " +
                          std::to_string(ckpt.config.input_dim) +
                          " features but test windows have " +
                          std::to_string(te.features()));
    }

    EvaluationReport report = evaluate_batch(
        ckpt, te, pipe.config.subset, pipe.config.rul_cap, rc.workers);
    std::vector<std::string> paths = emit_report(report, rc.out_dir, rc.format);

    out << "rmse: " << fmt(report.rmse_cycles) << " cycles\n";
    out << "mae: " << fmt(report.mae_cycles) << " cycles\n";
    out << "r2: " << fmt(report.r2_score) << "\n";
    for (const std::string& p : paths) out << "wrote: " << p << "\n";
    return 0;
}

std::vector<std::size_t> parse_sweep(const std::string& text) {
    std::vector<std::size_t> blocks;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        char* end = nullptr;
        unsigned long v = std::strtoul(token.c_str(), &end, 10);
        if (end == token.c_str() || *end != '\0' || v == 0) {
            throw UsageError("bad block count \"" + token + "\" in sweep");
        }
        blocks.push_back(v);
    }
    if (blocks.empty()) throw UsageError("empty block sweep");
    return blocks;
}

int cmd_ablate(const RunConfig& rc, std::ostream& out) {
    const std::string base = stem(rc, dataset_name(rc));
    FittedPipeline pipe = load_pipeline(require_file(base + "_pipeline.json"));
    WindowBatch tr = load_windows(require_file(base + "_train.windows"));
    WindowBatch va = load_windows(require_file(base + "_val.windows"));
    WindowBatch te = load_windows(require_file(base + "_test.windows"));

    std::string csv = "dataset,blocks,seed,rmse\n";
    for (std::size_t blocks : parse_sweep(rc.sweep)) {
        RunConfig row_rc = rc;
        row_rc.blocks = blocks;
        // one model per block count, independent but reproducible seeds
        row_rc.seed = rc.seed + blocks;
        ModelConfig mcfg = model_config(row_rc, tr.features());
        TrainConfig tcfg = train_config(row_rc);
        TrainResult res = train(mcfg, tr, va, tcfg);
        EvaluationReport rep = evaluate_batch(
            res.best, te, pipe.config.subset, pipe.config.rul_cap, rc.workers);
        csv += pipe.config.subset + "," + std::to_string(blocks) + "," +
               std::to_string(row_rc.seed) + "," + g17(rep.rmse_cycles) + "\n";
        out << "blocks " << blocks << ": rmse " << fmt(rep.rmse_cycles)
            << " cycles\n";
    }

    const std::string path = base + "_" + rc.variant + "_ablation.csv";
    std::ofstream file(path);
    if (!file) throw IoError("cannot open " + path + " for writing");
    file << csv;
    if (!file.flush()) throw IoError("write failed for " + path);
    out << "wrote: " << path << "\n";
    return 0;
}

int cmd_baselines(const RunConfig& rc, std::ostream& out) {
    const std::string base = stem(rc, dataset_name(rc));
    FittedPipeline pipe = load_pipeline(require_file(base + "_pipeline.json"));
    WindowBatch tr = load_windows(require_file(base + "_train.windows"));
    WindowBatch va = load_windows(require_file(base + "_val.windows"));
    WindowBatch te = load_windows(require_file(base + "_test.windows"));

    static const std::pair<const char*, const char*> kVariants[] = {
        {"lstm", "LSTM"},
        {"clstm", "cLSTM"},
        {"bilstm", "Bi-LSTM"},
        {"biclstm", "Bi-cLSTM"},
    };

    std::string csv = "variant,rmse_cycles,mae_cycles,mae_normalized,r2\n";
    for (const auto& [variant, display] : kVariants) {
        RunConfig row_rc = rc;
        row_rc.variant = variant;
        ModelConfig mcfg = model_config(row_rc, tr.features());
        TrainResult res = train(mcfg, tr, va, train_config(rc));
        EvaluationReport rep = evaluate_batch(
            res.best, te, pipe.config.subset, pipe.config.rul_cap, rc.workers);
        emit_report(rep, rc.out_dir, rc.format);
        csv += std::string(display) + "," + g17(rep.rmse_cycles) + "," +
               g17(rep.mae_cycles) + "," + g17(rep.mae_normalized) + "," +
               g17(rep.r2_score) + "\n";
        out << display << ": rmse " << fmt(rep.rmse_cycles) << " cycles, mae "
            << fmt(rep.mae_cycles) << " cycles, r2 " << fmt(rep.r2_score)
            << "\n";
    }

    const std::string path = base + "_baselines.csv";
    std::ofstream file(path);
    if (!file) throw IoError("cannot open " + path + " for writing");
    file << csv;
    if (!file.flush()) throw IoError("write failed for " + path);
    out << "wrote: " << path << "\n";
    return 0;
}

int cmd_gradcheck(const RunConfig& rc, std::size_t features,
                  std::size_t window, std::ostream& out) {
    ModelConfig m;
    m.input_dim = features;
    m.projection_dim = rc.proj;
    m.hidden_dim = rc.hidden;
    m.num_blocks = rc.blocks;
    m.corrector_hidden_dim = rc.hidden;
    apply_variant(m, rc.variant);
    m.seed = rc.seed;

    BiCLSTMParams params = init_params(m);
    const std::size_t batch = 3;
    Rng rng(m.seed + 1);
    std::vector<Tensor> steps(window, Tensor({batch, m.input_dim}));
    for (Tensor& s : steps) {
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.uniform(-1.0, 1.0);
    }
    Tensor targets({batch, 1});
    for (std::size_t i = 0; i < targets.size(); ++i) {
        targets[i] = rng.uniform(0.0, 1.0);
    }

    auto loss_value = [&]() {
        Graph g;
        ForwardNodes nodes = build_forward(g, params, m, steps);
        NodeId diff = g.sub(nodes.prediction, g.leaf(targets));
        return g.value(g.reduce_mean(g.mul(diff, diff)))[0];
    };

    Graph g;
    ForwardNodes nodes = build_forward(g, params, m, steps);
    NodeId diff = g.sub(nodes.prediction, g.leaf(targets));
    g.backward(g.reduce_mean(g.mul(diff, diff)));

    struct Group {
        std::string name;
        Tensor* values;
        Tensor analytic;
    };
    std::vector<Group> groups;
    auto named = named_params(params);
    for (std::size_t i = 0; i < named.size(); ++i) {
        groups.push_back(
            {named[i].first, named[i].second, g.grad(nodes.params[i].second)});
    }
    for (std::size_t t = 0; t < window; ++t) {
        groups.push_back(
            {"input/step" + std::to_string(t), &steps[t], g.grad(nodes.steps[t])});
    }
    if (rc.corrupt_gradient) groups.front().analytic[0] += 0.05;

    const double eps = 1e-5;
    double worst = 0.0;
    std::string worst_group = "none";
    for (Group& grp : groups) {
        double group_max = 0.0;
        Tensor& v = *grp.values;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + eps;
            const double up = loss_value();
            v[i] = keep - eps;
            const double down = loss_value();
            v[i] = keep;
            const double fd = (up - down) / (2.0 * eps);
            const double an = grp.analytic[i];
            const double rel =
                std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            group_max = std::max(group_max, rel);
        }
        char line[128];
        std::snprintf(line, sizeof(line), "%s: max rel err %.3e\n",
                      grp.name.c_str(), group_max);
        out << line;
        if (group_max > worst) {
            worst = group_max;
            worst_group = grp.name;
        }
    }

    char summary[128];
    std::snprintf(summary, sizeof(summary), "max relative error: %.3e (%s)\n",
                  worst, worst_group.c_str());
    out << summary;
    if (!(worst < 1e-4)) {
        throw NumericError("gradient check failed: max relative error " +
                           std::to_string(worst) + " in " + worst_group);
    }
    out << "gradient check passed\n";
    return 0;
}

void add_dataset_options(CLI::App* cmd, RunConfig& rc) {
    CLI::Option* subset =
        cmd->add_option("--subset", rc.subset, "C-MAPSS subset id (FD001..FD004)");
    CLI::Option* synthetic = cmd->add_option("--synthetic", rc.synthetic,
                                             "synthetic fleet spec JSON path");
    subset->excludes(synthetic);
    synthetic->excludes(subset);
}

void add_model_options(CLI::App* cmd, RunConfig& rc) {
    cmd->add_option("--variant", rc.variant,
                    "architecture: lstm | clstm | bilstm | biclstm");
    cmd->add_option("--blocks", rc.blocks, "recurrent block count");
    cmd->add_option("--hidden", rc.hidden, "hidden units per direction");
    cmd->add_option("--proj", rc.proj, "projection width");
}

void add_train_options(CLI::App* cmd, RunConfig& rc) {
    cmd->add_option("--lr", rc.lr, "Adam learning rate");
    cmd->add_option("--batch", rc.batch, "mini-batch size");
    cmd->add_option("--patience", rc.patience, "early-stopping patience");
    cmd->add_option("--max-epochs", rc.max_epochs, "epoch cap");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    RunConfig rc;
    std::size_t gc_blocks = 2;
    std::size_t gc_hidden = 6;
    std::size_t gc_proj = 6;
    std::size_t gc_features = 5;
    std::size_t gc_window = 4;

    CLI::App app{"RUL estimation pipeline for turbofan run-to-failure data"};
    app.require_subcommand(1);

    CLI::App* pre = app.add_subcommand(
        "preprocess", "fit the feature pipeline and write window batches");
    add_dataset_options(pre, rc);
    pre->add_option("--data-dir", rc.data_dir, "directory with the data files");
    pre->add_option("--out-dir", rc.out_dir, "output directory");
    pre->add_option("--seed", rc.seed, "pipeline and split seed");

    CLI::App* tr = app.add_subcommand(
        "train", "train a model on preprocessed window batches");
    add_dataset_options(tr, rc);
    tr->add_option("--out-dir", rc.out_dir, "directory with the window batches");
    add_model_options(tr, rc);
    add_train_options(tr, rc);
    tr->add_option("--seed", rc.seed, "model and shuffle seed");

    CLI::App* ev = app.add_subcommand(
        "evaluate", "score a checkpoint on the test windows");
    add_dataset_options(ev, rc);
    ev->add_option("--out-dir", rc.out_dir, "directory with pipeline artifacts");
    ev->add_option("--variant", rc.variant, "checkpoint variant to load");
    ev->add_option("--format", rc.format, "report format: json | csv | all");

    CLI::App* ab = app.add_subcommand(
        "ablate", "sweep the block count and tabulate test RMSE");
    add_dataset_options(ab, rc);
    ab->add_option("--out-dir", rc.out_dir, "directory with pipeline artifacts");
    add_model_options(ab, rc);
    add_train_options(ab, rc);
    ab->add_option("--seed", rc.seed, "base seed; each row trains at seed+blocks");
    ab->add_option("--sweep", rc.sweep, "comma-separated block counts");

    CLI::App* bl = app.add_subcommand(
        "baselines", "train all four variants on identical data and seed");
    add_dataset_options(bl, rc);
    bl->add_option("--out-dir", rc.out_dir, "directory with pipeline artifacts");
    bl->add_option("--blocks", rc.blocks, "recurrent block count");
    bl->add_option("--hidden", rc.hidden, "hidden units per direction");
    bl->add_option("--proj", rc.proj, "projection width");
    add_train_options(bl, rc);
    bl->add_option("--seed", rc.seed, "shared seed for every variant");
    bl->add_option("--format", rc.format, "report format: json | csv | all");

    CLI::App* gc = app.add_subcommand(
        "gradcheck", "finite-difference check of the full model's gradients");
    gc->add_option("--variant", rc.variant,
                   "architecture: lstm | clstm | bilstm | biclstm");
    gc->add_option("--blocks", gc_blocks, "recurrent block count");
    gc->add_option("--hidden", gc_hidden, "hidden units per direction");
    gc->add_option("--proj", gc_proj, "projection width");
    gc->add_option("--features", gc_features, "input feature count F");
    gc->add_option("--window", gc_window, "window length W");
    gc->add_option("--seed", rc.seed, "parameter and probe seed");
    gc->add_flag("--corrupt-gradient", rc.corrupt_gradient,
                 "deliberately break one gradient (must then fail)")
        ->group("");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("rulforge");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        rc.workers = resolve_workers();
        if (gc->parsed()) {
            rc.blocks = gc_blocks;
            rc.hidden = gc_hidden;
            rc.proj = gc_proj;
            return cmd_gradcheck(rc, gc_features, gc_window, out);
        }
        if (!pre->parsed() && rc.subset.empty() && rc.synthetic.empty()) {
            throw UsageError("pass --subset or --synthetic to name the dataset");
        }
        if (pre->parsed()) {
            if (rc.subset.empty() && rc.synthetic.empty()) {
                throw UsageError("pass --subset or --synthetic to name the dataset");
            }
            return cmd_preprocess(rc, out, err);
        }
        if (tr->parsed()) return cmd_train(rc, out);
        if (ev->parsed()) return cmd_evaluate(rc, out);
        if (ab->parsed()) return cmd_ablate(rc, out);
        if (bl->parsed()) return cmd_baselines(rc, out);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace rulforge
