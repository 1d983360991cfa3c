#include "rulforge/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "rulforge/errors.hpp"
#include "rulforge/graph.hpp"
#include "rulforge/rng.hpp"
#include "rulforge/serialize.hpp"

namespace rulforge {

namespace {

// Work is cut into fixed-size shards regardless of worker count, and shard
// results are combined in shard order, so gradients and predictions are
// bit-identical for any RULFORGE_THREADS setting.
constexpr std::size_t kShardSize = 64;

std::vector<Tensor> gather_steps(const WindowBatch& data, std::span<const std::uint32_t> rows) {
    const std::size_t W = data.window(), F = data.features(), n = rows.size();
    std::vector<Tensor> steps(W, Tensor({n, F}));
    const std::vector<double>& src = data.inputs.data();
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t base = static_cast<std::size_t>(rows[r]) * W * F;
        for (std::size_t t = 0; t < W; ++t)
            for (std::size_t j = 0; j < F; ++j) steps[t].at(r, j) = src[base + t * F + j];
    }
    return steps;
}

struct ShardGrad {
    double loss = 0.0;
    std::size_t rows = 0;
    std::vector<Tensor> grads;
};

// One forward/backward pass over a shard of the mini-batch; the loss is the
// mean over the shard and gradients are left unscaled.
ShardGrad run_grad_shard(const BiCLSTMParams& params, const ModelConfig& cfg,
                         const WindowBatch& data, std::span<const std::uint32_t> rows) {
    ShardGrad out;
    out.rows = rows.size();
    Graph g;
    ForwardNodes nodes = build_forward(g, params, cfg, gather_steps(data, rows));
    Tensor targets({rows.size(), 1});
    for (std::size_t r = 0; r < rows.size(); ++r) targets.data()[r] = data.labels[rows[r]];
    const NodeId diff = g.sub(nodes.prediction, g.leaf(targets));
    const NodeId loss = g.reduce_mean(g.mul(diff, diff));
    out.loss = g.value(loss)[0];
    if (!std::isfinite(out.loss)) return out;  // caller handles divergence
    g.backward(loss);
    out.grads.reserve(nodes.params.size());
    for (const auto& [name, id] : nodes.params) out.grads.push_back(g.grad(id));
    return out;
}

std::vector<double> run_forward_shard(const BiCLSTMParams& params, const ModelConfig& cfg,
                                      const WindowBatch& data,
                                      std::span<const std::uint32_t> rows) {
    Graph g;
    ForwardNodes nodes = build_forward(g, params, cfg, gather_steps(data, rows));
    return g.value(nodes.prediction).data();
}

// Runs fn(shard_index) over ceil(n / kShardSize) shards on up to `workers`
// threads. fn must only write shard-local state.
void for_each_shard(std::size_t n, std::size_t workers,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    const std::size_t shards = (n + kShardSize - 1) / kShardSize;
    if (shards == 0) return;
    const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), shards);
    if (threads <= 1) {
        for (std::size_t s = 0; s < shards; ++s)
            fn(s, s * kShardSize, std::min(n, (s + 1) * kShardSize));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::size_t s = next.fetch_add(1); s < shards; s = next.fetch_add(1))
                    fn(s, s * kShardSize, std::min(n, (s + 1) * kShardSize));
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

struct BatchGrad {
    double loss = 0.0;
    std::vector<Tensor> grads;
    bool finite = true;
};

BatchGrad batched_grad(const BiCLSTMParams& params, const ModelConfig& cfg,
                       const WindowBatch& data, std::span<const std::uint32_t> rows,
                       std::size_t workers) {
    const std::size_t n = rows.size();
    const std::size_t shards = (n + kShardSize - 1) / kShardSize;
    std::vector<ShardGrad> results(shards);
    for_each_shard(n, workers, [&](std::size_t s, std::size_t b0, std::size_t b1) {
        results[s] = run_grad_shard(params, cfg, data, rows.subspan(b0, b1 - b0));
    });

    BatchGrad out;
    for (std::size_t s = 0; s < shards; ++s) {
        const ShardGrad& sg = results[s];
        const double scale = static_cast<double>(sg.rows) / static_cast<double>(n);
        if (!std::isfinite(sg.loss)) {
            out.finite = false;
            return out;
        }
        out.loss += sg.loss * scale;
        if (out.grads.empty()) {
            out.grads = sg.grads;
            for (Tensor& t : out.grads)
                for (double& v : t.data()) v *= scale;
        } else {
            for (std::size_t i = 0; i < out.grads.size(); ++i)
                for (std::size_t j = 0; j < out.grads[i].size(); ++j)
                    out.grads[i].data()[j] += sg.grads[i][j] * scale;
        }
    }
    return out;
}

std::vector<double> predict_raw(const BiCLSTMParams& params, const ModelConfig& cfg,
                                const WindowBatch& data, std::size_t workers) {
    const std::size_t n = data.count();
    std::vector<std::uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0u);
    std::vector<double> preds(n);
    for_each_shard(n, workers, [&](std::size_t, std::size_t b0, std::size_t b1) {
        const std::vector<double> shard =
            run_forward_shard(params, cfg, data, std::span<const std::uint32_t>(rows).subspan(b0, b1 - b0));
        std::copy(shard.begin(), shard.end(), preds.begin() + static_cast<std::ptrdiff_t>(b0));
    });
    for (double& p : preds) p = std::clamp(p * kRulCap, 0.0, kRulCap);
    return preds;
}

double val_rmse_cycles(const BiCLSTMParams& params, const ModelConfig& cfg,
                       const WindowBatch& val, std::size_t workers) {
    const std::vector<double> preds = predict_raw(params, cfg, val, workers);
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - val.labels[i] * kRulCap;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(preds.size()));
}

}  // namespace

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1)) {
        throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (cfg.patience < 1) throw ConfigError("early-stop patience must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

AdamState make_adam_state(const BiCLSTMParams& params) {
    AdamState st;
    for (const auto& [name, t] : named_params(params)) {
        st.m.emplace_back(t->shape());
        st.v.emplace_back(t->shape());
    }
    return st;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw ContractError("mse_loss length mismatch: " + std::to_string(pred.size()) + " vs " +
                            std::to_string(target.size()));
    }
    if (pred.empty()) throw ContractError("mse_loss on empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

void adam_step(BiCLSTMParams& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg) {
    auto named = named_params(params);
    if (grads.size() != named.size() || state.m.size() != named.size() ||
        state.v.size() != named.size()) {
        throw ContractError("adam_step: gradient/moment count does not match parameter count");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < named.size(); ++i) {
        Tensor& theta = *named[i].second;
        const Tensor& g = grads[i];
        if (!g.same_shape(theta)) {
            throw ContractError("adam_step: gradient shape mismatch for " + named[i].first);
        }
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double gj = g[j];
            if (!std::isfinite(gj)) {
                throw NumericError("non-finite gradient for parameter " + named[i].first);
            }
            double& m = state.m[i].data()[j];
            double& v = state.v[i].data()[j];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * gj;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * gj * gj;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            theta.data()[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

TrainResult train(const ModelConfig& model_cfg, const WindowBatch& train_set,
                  const WindowBatch& val_set, const TrainConfig& cfg) {
    validate(model_cfg);
    validate(cfg);
    if (train_set.count() == 0 || val_set.count() == 0) {
        throw ContractError("training requires nonempty train and validation sets");
    }
    validate(train_set);
    validate(val_set);
    if (train_set.features() != model_cfg.input_dim || val_set.features() != model_cfg.input_dim) {
        throw ConfigError("window feature width " + std::to_string(train_set.features()) +
                          " does not match model input_dim " +
                          std::to_string(model_cfg.input_dim));
    }

    BiCLSTMParams params = init_params(model_cfg);
    AdamState adam = make_adam_state(params);
    const std::size_t n = train_set.count();

    TrainResult result;
    BiCLSTMParams best_params = params;
    double best_rmse = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    Rng shuffle_base(cfg.seed);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng epoch_rng = shuffle_base.derive(epoch);
        epoch_rng.shuffle(order);

        double loss_sum = 0.0;
        bool epoch_ok = true;
        for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(n, b0 + cfg.batch_size);
            const BatchGrad bg = batched_grad(
                params, model_cfg, train_set,
                std::span<const std::uint32_t>(order).subspan(b0, b1 - b0), cfg.workers);
            if (!bg.finite) {
                result.diverged = true;
                epoch_ok = false;
                break;
            }
            loss_sum += bg.loss * static_cast<double>(b1 - b0);
            adam_step(params, bg.grads, adam, cfg);
        }
        if (!epoch_ok) break;

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = loss_sum / static_cast<double>(n);
        stats.val_rmse_cycles = val_rmse_cycles(params, model_cfg, val_set, cfg.workers);
        result.history.push_back(stats);

        if (!std::isfinite(stats.val_rmse_cycles)) {
            result.diverged = true;
            break;
        }
        if (stats.val_rmse_cycles < best_rmse) {
            best_rmse = stats.val_rmse_cycles;
            best_params = params;
            result.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        if (stale >= cfg.patience) break;
    }

    result.best_val_rmse = result.best_epoch ? best_rmse : 0.0;
    nlohmann::json meta;
    meta["best_epoch"] = result.best_epoch;
    meta["epochs_run"] = result.history.size();
    meta["diverged"] = result.diverged;
    meta["train_windows"] = train_set.count();
    meta["val_windows"] = val_set.count();
    if (result.best_epoch) {
        meta["best_val_rmse_cycles"] = best_rmse;
    } else {
        meta["best_val_rmse_cycles"] = nullptr;
    }
    result.best.config = model_cfg;
    result.best.params = std::move(best_params);
    result.best.metadata_json = meta.dump();
    return result;
}

std::vector<double> predict_batch(const Checkpoint& ckpt, const Tensor& inputs,
                                  std::size_t workers) {
    if (inputs.rank() != 3) {
        throw ConfigError("predict_batch expects B x W x F inputs, got shape " +
                          shape_str(inputs.shape()));
    }
    if (inputs.dim(2) != ckpt.config.input_dim) {
        throw ConfigError("window feature width " + std::to_string(inputs.dim(2)) +
                          " does not match checkpoint input_dim " +
                          std::to_string(ckpt.config.input_dim));
    }
    if (inputs.dim(0) == 0) return {};
    WindowBatch view;
    view.inputs = inputs;
    view.labels.assign(inputs.dim(0), 0.0);
    view.units.assign(inputs.dim(0), 0);
    view.end_cycles.assign(inputs.dim(0), 0);
    return predict_raw(ckpt.params, ckpt.config, view, workers);
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open history file for writing: " + path);
    out << "epoch,train_mse,val_rmse_cycles\n";
    for (const EpochStats& e : history) {
        out << e.epoch << "," << g17(e.train_mse) << "," << g17(e.val_rmse_cycles) << "\n";
    }
    if (!out) throw IoError("failed writing history file: " + path);
}

}  // namespace rulforge
