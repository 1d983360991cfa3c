#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rulforge/model.hpp"
#include "rulforge/windows.hpp"

namespace rulforge {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 42;
    std::size_t workers = 1;
};

void validate(const TrainConfig& cfg);

struct AdamState {
    std::vector<Tensor> m;  // first moments, named_params order
    std::vector<Tensor> v;  // second moments
    std::uint64_t step = 0;
};

AdamState make_adam_state(const BiCLSTMParams& params);

double mse_loss(std::span<const double> pred, std::span<const double> target);

// In-place Adam update; grads are aligned with named_params(params).
void adam_step(BiCLSTMParams& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_rmse_cycles = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;  // 1-based; 0 when no epoch completed
    double best_val_rmse = 0.0;
    bool diverged = false;
};

// Mini-batch training with seeded shuffling, per-epoch validation RMSE in raw
// cycles, best-checkpoint selection, and early stopping. A NaN training loss
// aborts the run and returns the best checkpoint seen so far.
TrainResult train(const ModelConfig& model_cfg, const WindowBatch& train_set,
                  const WindowBatch& val_set, const TrainConfig& cfg);

// Forward pass on raw-cycle scale: denormalize by the cap and clamp to
// [0, cap].
std::vector<double> predict_batch(const Checkpoint& ckpt, const Tensor& inputs,
                                  std::size_t workers = 1);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace rulforge
