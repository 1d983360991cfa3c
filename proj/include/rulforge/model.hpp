#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rulforge/graph.hpp"
#include "rulforge/tensor.hpp"

namespace rulforge {

inline constexpr double kLayerNormEps = 1e-5;

// The four architecture variants: (bidirectional, use_corrector) selects
// plain LSTM (false,false), cLSTM (false,true), Bi-LSTM (true,false) or
// Bi-cLSTM (true,true).
struct ModelConfig {
    std::size_t input_dim = 0;          // F, set from the window batch
    std::size_t projection_dim = 64;
    std::size_t hidden_dim = 64;        // H per direction
    std::size_t num_blocks = 4;
    bool bidirectional = true;
    bool use_corrector = true;
    std::size_t corrector_hidden_dim = 32;
    std::uint64_t seed = 42;

    std::size_t directions() const { return bidirectional ? 2 : 1; }
    std::size_t block_output_dim() const { return directions() * hidden_dim; }
    std::size_t head_input_dim() const { return num_blocks * block_output_dim(); }
};

void validate(const ModelConfig& cfg);

std::string variant_name(const ModelConfig& cfg);  // lstm | clstm | bilstm | biclstm
// Sets bidirectional/use_corrector from a variant name; throws UsageError on
// an unknown name.
void apply_variant(ModelConfig& cfg, const std::string& variant);

struct ProjectionParams {
    Tensor w;  // projection_dim x F
    Tensor b;  // projection_dim
};

// One LSTM direction: input weights w_* are H x in, recurrent u_* are H x H,
// biases are H. Gate order everywhere: input i, forget f, candidate g,
// output o.
struct LSTMCellParams {
    Tensor w_i, w_f, w_g, w_o;
    Tensor u_i, u_f, u_g, u_o;
    Tensor b_i, b_f, b_g, b_o;
};

// Residual corrector: concat(h_t, block input at t) -> hidden -> dim(h_t),
// ReLU in between, followed by layer normalization of h_t + correction.
struct CorrectorParams {
    Tensor w1, b1;            // hidden x (DH + in), hidden
    Tensor w2, b2;            // DH x hidden, DH
    Tensor ln_gain, ln_bias;  // DH
};

struct BlockParams {
    LSTMCellParams fwd;
    std::optional<LSTMCellParams> bwd;        // present iff bidirectional
    std::optional<CorrectorParams> corrector; // present iff use_corrector
};

struct HeadParams {
    Tensor w;  // 1 x (num_blocks * D * H)
    Tensor b;  // scalar
};

struct LSTMState {
    Tensor h;  // H
    Tensor c;  // H
};

struct BiCLSTMParams {
    ProjectionParams projection;
    std::vector<BlockParams> blocks;
    HeadParams head;
};

// Canonical enumeration of every learnable tensor. All per-parameter state
// (Adam moments, gradients, checkpoints) is aligned with this order.
std::vector<std::pair<std::string, Tensor*>> named_params(BiCLSTMParams& p);
std::vector<std::pair<std::string, const Tensor*>> named_params(const BiCLSTMParams& p);

// Weights uniform in +-1/sqrt(fan_in) from the seeded generator; biases zero
// except the forget-gate bias (1.0) and the layer-norm gain (1.0).
BiCLSTMParams init_params(const ModelConfig& cfg);

// Graph construction. `steps` holds W tensors of shape B x F; the returned
// prediction node is B x 1 on the normalized label scale. `params` lists the
// leaf node of every learnable tensor in named_params order.
struct ForwardNodes {
    NodeId prediction = 0;
    std::vector<std::pair<std::string, NodeId>> params;
    std::vector<NodeId> steps;  // input leaves, one per window position
};

ForwardNodes build_forward(Graph& g, const BiCLSTMParams& p, const ModelConfig& cfg,
                           const std::vector<Tensor>& steps);

// Value-level operations (thin wrappers over the graph builder so the math
// has a single implementation).
Tensor project(const ProjectionParams& p, const Tensor& x);
LSTMState lstm_step(const LSTMCellParams& p, const Tensor& input, const LSTMState& state);
// seq is W x d; result is W x (2H): forward pass output concatenated with the
// backward pass output at each step.
Tensor bilstm_forward(const LSTMCellParams& fwd, const LSTMCellParams& bwd, const Tensor& seq);
Tensor layer_norm(const Tensor& v, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);
// An absent corrector is the identity on h (no layer norm), which degrades
// the block to a plain (Bi-)LSTM.
Tensor correct(const std::optional<CorrectorParams>& p, const Tensor& h, const Tensor& x);

// Single window (W x F) -> scalar prediction, normalized scale.
double forward(const BiCLSTMParams& p, const ModelConfig& cfg, const Tensor& window);
// Batch (B x W x F) -> B predictions, normalized scale.
std::vector<double> forward_batch(const BiCLSTMParams& p, const ModelConfig& cfg,
                                  const Tensor& batch);

// Extracts step t of a B x W x F batch as a B x F tensor.
Tensor batch_step(const Tensor& batch, std::size_t t);

// Checkpoint: a single JSON document with config, named parameter tensors
// (hex-encoded doubles, bit-exact), seed and training metadata.
struct Checkpoint {
    ModelConfig config;
    BiCLSTMParams params;
    std::string metadata_json;  // free-form object, "{}" when absent
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

std::string config_digest(const ModelConfig& cfg);

}  // namespace rulforge
