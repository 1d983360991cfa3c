#include "rulforge/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "rulforge/errors.hpp"
#include "rulforge/rng.hpp"
#include "rulforge/serialize.hpp"

namespace rulforge {

using nlohmann::json;

void validate(const ModelConfig& cfg) {
    if (cfg.input_dim < 1) throw ConfigError("model input_dim must be >= 1");
    if (cfg.projection_dim < 1) throw ConfigError("projection_dim must be >= 1");
    if (cfg.hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (cfg.num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
    if (cfg.use_corrector && cfg.corrector_hidden_dim < 1)
        throw ConfigError("corrector_hidden_dim must be >= 1");
}

std::string variant_name(const ModelConfig& cfg) {
    if (cfg.bidirectional) return cfg.use_corrector ? "biclstm" : "bilstm";
    return cfg.use_corrector ? "clstm" : "lstm";
}

void apply_variant(ModelConfig& cfg, const std::string& variant) {
    if (variant == "lstm") {
        cfg.bidirectional = false;
        cfg.use_corrector = false;
    } else if (variant == "clstm") {
        cfg.bidirectional = false;
        cfg.use_corrector = true;
    } else if (variant == "bilstm") {
        cfg.bidirectional = true;
        cfg.use_corrector = false;
    } else if (variant == "biclstm") {
        cfg.bidirectional = true;
        cfg.use_corrector = true;
    } else {
        throw UsageError("unknown variant '" + variant +
                         "' (expected lstm|clstm|bilstm|biclstm)");
    }
}

namespace {

template <typename Params, typename T>
void collect_params(Params& p, std::vector<std::pair<std::string, T*>>& out) {
    out.emplace_back("proj.w", &p.projection.w);
    out.emplace_back("proj.b", &p.projection.b);
    for (std::size_t k = 0; k < p.blocks.size(); ++k) {
        const std::string prefix = "block" + std::to_string(k) + ".";
        auto cell = [&](const std::string& dir, auto& c) {
            out.emplace_back(prefix + dir + ".w_i", &c.w_i);
            out.emplace_back(prefix + dir + ".w_f", &c.w_f);
            out.emplace_back(prefix + dir + ".w_g", &c.w_g);
            out.emplace_back(prefix + dir + ".w_o", &c.w_o);
            out.emplace_back(prefix + dir + ".u_i", &c.u_i);
            out.emplace_back(prefix + dir + ".u_f", &c.u_f);
            out.emplace_back(prefix + dir + ".u_g", &c.u_g);
            out.emplace_back(prefix + dir + ".u_o", &c.u_o);
            out.emplace_back(prefix + dir + ".b_i", &c.b_i);
            out.emplace_back(prefix + dir + ".b_f", &c.b_f);
            out.emplace_back(prefix + dir + ".b_g", &c.b_g);
            out.emplace_back(prefix + dir + ".b_o", &c.b_o);
        };
        cell("fwd", p.blocks[k].fwd);
        if (p.blocks[k].bwd) cell("bwd", *p.blocks[k].bwd);
        if (p.blocks[k].corrector) {
            auto& c = *p.blocks[k].corrector;
            out.emplace_back(prefix + "corr.w1", &c.w1);
            out.emplace_back(prefix + "corr.b1", &c.b1);
            out.emplace_back(prefix + "corr.w2", &c.w2);
            out.emplace_back(prefix + "corr.b2", &c.b2);
            out.emplace_back(prefix + "corr.ln_gain", &c.ln_gain);
            out.emplace_back(prefix + "corr.ln_bias", &c.ln_bias);
        }
    }
    out.emplace_back("head.w", &p.head.w);
    out.emplace_back("head.b", &p.head.b);
}

LSTMCellParams make_cell(std::size_t input_dim, std::size_t hidden) {
    LSTMCellParams c;
    for (Tensor* w : {&c.w_i, &c.w_f, &c.w_g, &c.w_o}) *w = Tensor({hidden, input_dim});
    for (Tensor* u : {&c.u_i, &c.u_f, &c.u_g, &c.u_o}) *u = Tensor({hidden, hidden});
    for (Tensor* b : {&c.b_i, &c.b_f, &c.b_g, &c.b_o}) *b = Tensor({hidden});
    return c;
}

BiCLSTMParams make_params(const ModelConfig& cfg) {
    BiCLSTMParams p;
    p.projection.w = Tensor({cfg.projection_dim, cfg.input_dim});
    p.projection.b = Tensor({cfg.projection_dim});
    const std::size_t out_dim = cfg.block_output_dim();
    p.blocks.resize(cfg.num_blocks);
    for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
        const std::size_t in_dim = k == 0 ? cfg.projection_dim : out_dim;
        p.blocks[k].fwd = make_cell(in_dim, cfg.hidden_dim);
        if (cfg.bidirectional) p.blocks[k].bwd = make_cell(in_dim, cfg.hidden_dim);
        if (cfg.use_corrector) {
            CorrectorParams c;
            c.w1 = Tensor({cfg.corrector_hidden_dim, out_dim + in_dim});
            c.b1 = Tensor({cfg.corrector_hidden_dim});
            c.w2 = Tensor({out_dim, cfg.corrector_hidden_dim});
            c.b2 = Tensor({out_dim});
            c.ln_gain = Tensor({out_dim});
            c.ln_bias = Tensor({out_dim});
            p.blocks[k].corrector = std::move(c);
        }
    }
    p.head.w = Tensor({1, cfg.head_input_dim()});
    p.head.b = Tensor({1});
    return p;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> named_params(BiCLSTMParams& p) {
    std::vector<std::pair<std::string, Tensor*>> out;
    collect_params(p, out);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> named_params(const BiCLSTMParams& p) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    collect_params(p, out);
    return out;
}

BiCLSTMParams init_params(const ModelConfig& cfg) {
    validate(cfg);
    BiCLSTMParams p = make_params(cfg);
    Rng rng(cfg.seed);
    for (auto& [name, tensor] : named_params(p)) {
        if (ends_with(name, "ln_gain")) {
            tensor->fill(1.0);
        } else if (ends_with(name, ".b_f")) {
            tensor->fill(1.0);
        } else if (tensor->rank() == 2) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(tensor->cols()));
            for (double& v : tensor->data()) v = rng.uniform(-bound, bound);
        } else {
            tensor->fill(0.0);
        }
    }
    return p;
}

namespace {

// Transposed-weight nodes are created once per graph and reused across all
// time steps.
class LeafTable {
public:
    LeafTable(Graph& g) : g_(g) {}

    NodeId id(const Tensor& t) const { return ids_.at(&t); }

    NodeId trans(const Tensor& t) {
        const NodeId base = id(t);
        auto it = trans_.find(base);
        if (it != trans_.end()) return it->second;
        const NodeId node = g_.transpose(base);
        trans_.emplace(base, node);
        return node;
    }

    void insert(const Tensor& t, NodeId node) { ids_.emplace(&t, node); }

private:
    Graph& g_;
    std::unordered_map<const Tensor*, NodeId> ids_;
    std::unordered_map<NodeId, NodeId> trans_;
};

// One LSTM direction over `xs` (each B x in). Initial state is zero unless
// h0/c0 are provided. Returns the hidden state node at every step, indexed
// by original time position.
std::vector<NodeId> run_lstm_direction(Graph& g, LeafTable& leaves, const LSTMCellParams& cell,
                                       const std::vector<NodeId>& xs, std::size_t batch,
                                       std::size_t hidden, bool reverse,
                                       std::optional<NodeId> h0 = std::nullopt,
                                       std::optional<NodeId> c0 = std::nullopt,
                                       NodeId* final_cell = nullptr) {
    const NodeId wt_i = leaves.trans(cell.w_i), wt_f = leaves.trans(cell.w_f);
    const NodeId wt_g = leaves.trans(cell.w_g), wt_o = leaves.trans(cell.w_o);
    const NodeId ut_i = leaves.trans(cell.u_i), ut_f = leaves.trans(cell.u_f);
    const NodeId ut_g = leaves.trans(cell.u_g), ut_o = leaves.trans(cell.u_o);
    const NodeId b_i = leaves.id(cell.b_i), b_f = leaves.id(cell.b_f);
    const NodeId b_g = leaves.id(cell.b_g), b_o = leaves.id(cell.b_o);

    NodeId h = h0 ? *h0 : g.leaf(Tensor({batch, hidden}));
    NodeId c = c0 ? *c0 : g.leaf(Tensor({batch, hidden}));

    const std::size_t steps = xs.size();
    std::vector<NodeId> hs(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t t = reverse ? steps - 1 - k : k;
        auto gate = [&](NodeId wt, NodeId ut, NodeId b) {
            return g.add_row(g.add(g.matmul(xs[t], wt), g.matmul(h, ut)), b);
        };
        const NodeId gi = g.sigmoid(gate(wt_i, ut_i, b_i));
        const NodeId gf = g.sigmoid(gate(wt_f, ut_f, b_f));
        const NodeId gg = g.tanh(gate(wt_g, ut_g, b_g));
        const NodeId go = g.sigmoid(gate(wt_o, ut_o, b_o));
        c = g.add(g.mul(gf, c), g.mul(gi, gg));
        h = g.mul(go, g.tanh(c));
        hs[t] = h;
    }
    if (final_cell) *final_cell = c;
    return hs;
}

LeafTable make_leaves(Graph& g, const BiCLSTMParams& p, ForwardNodes& out) {
    LeafTable leaves(g);
    for (const auto& [name, tensor] : named_params(p)) {
        const NodeId id = g.leaf(*tensor);
        leaves.insert(*tensor, id);
        out.params.emplace_back(name, id);
    }
    return leaves;
}

}  // namespace

ForwardNodes build_forward(Graph& g, const BiCLSTMParams& p, const ModelConfig& cfg,
                           const std::vector<Tensor>& steps) {
    validate(cfg);
    if (steps.empty()) throw ContractError("forward on an empty sequence");
    const std::size_t batch = steps[0].rank() == 2 ? steps[0].rows() : 0;
    for (const Tensor& s : steps) {
        if (s.rank() != 2 || s.rows() != batch || s.cols() != cfg.input_dim) {
            throw ConfigError("window step shape " + shape_str(s.shape()) +
                              " does not match input_dim " + std::to_string(cfg.input_dim));
        }
    }
    if (p.blocks.size() != cfg.num_blocks) {
        throw ConfigError("parameter block count does not match config num_blocks");
    }

    ForwardNodes out;
    LeafTable leaves = make_leaves(g, p, out);

    const std::size_t W = steps.size();
    std::vector<NodeId> xs(W);
    for (std::size_t t = 0; t < W; ++t) xs[t] = g.leaf(steps[t]);
    out.steps = xs;

    // Projection applied per step.
    const NodeId wp_t = leaves.trans(p.projection.w);
    const NodeId bp = leaves.id(p.projection.b);
    std::vector<NodeId> seq(W);
    for (std::size_t t = 0; t < W; ++t)
        seq[t] = g.relu(g.add_row(g.matmul(xs[t], wp_t), bp));

    // Serially stacked blocks; block k consumes block k-1's corrected output.
    std::vector<NodeId> block_finals;
    for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
        const BlockParams& blk = p.blocks[k];
        std::vector<NodeId> hidden =
            run_lstm_direction(g, leaves, blk.fwd, seq, batch, cfg.hidden_dim, false);
        if (cfg.bidirectional) {
            if (!blk.bwd) throw ConfigError("bidirectional config but no backward parameters");
            std::vector<NodeId> back =
                run_lstm_direction(g, leaves, *blk.bwd, seq, batch, cfg.hidden_dim, true);
            for (std::size_t t = 0; t < W; ++t) {
                const NodeId parts[] = {hidden[t], back[t]};
                hidden[t] = g.concat(parts, 1);
            }
        }
        if (cfg.use_corrector) {
            if (!blk.corrector) throw ConfigError("use_corrector config but no corrector parameters");
            const CorrectorParams& c = *blk.corrector;
            const NodeId w1t = leaves.trans(c.w1), w2t = leaves.trans(c.w2);
            const NodeId b1 = leaves.id(c.b1), b2 = leaves.id(c.b2);
            const NodeId lg = leaves.id(c.ln_gain), lb = leaves.id(c.ln_bias);
            for (std::size_t t = 0; t < W; ++t) {
                const NodeId cat[] = {hidden[t], seq[t]};
                const NodeId fin = g.concat(cat, 1);
                const NodeId a1 = g.relu(g.add_row(g.matmul(fin, w1t), b1));
                const NodeId corr = g.add_row(g.matmul(a1, w2t), b2);
                hidden[t] = g.layer_norm_rows(g.add(hidden[t], corr), lg, lb, kLayerNormEps);
            }
        }
        block_finals.push_back(hidden[W - 1]);
        seq = std::move(hidden);
    }

    const NodeId head_in =
        block_finals.size() == 1 ? block_finals[0] : g.concat(block_finals, 1);
    out.prediction = g.add(g.matmul(head_in, leaves.trans(p.head.w)), leaves.id(p.head.b));
    return out;
}

Tensor project(const ProjectionParams& p, const Tensor& x) {
    if (x.rank() != 1 || x.size() != p.w.cols()) {
        throw ConfigError("project input shape " + shape_str(x.shape()) +
                          " does not match projection " + shape_str(p.w.shape()));
    }
    Graph g;
    const NodeId xv = g.leaf(Tensor({1, x.size()}, x.data()));
    const NodeId out = g.relu(g.add_row(g.matmul(xv, g.transpose(g.leaf(p.w))), g.leaf(p.b)));
    return Tensor::vector(g.value(out).data());
}

LSTMState lstm_step(const LSTMCellParams& p, const Tensor& input, const LSTMState& state) {
    if (input.rank() != 1 || input.size() != p.w_i.cols() || state.h.size() != p.u_i.cols() ||
        state.c.size() != p.u_i.cols()) {
        throw ConfigError("lstm_step dimensions do not match cell parameters");
    }
    const std::size_t hidden = p.u_i.cols();
    Graph g;
    LeafTable leaves(g);
    for (const Tensor* t : {&p.w_i, &p.w_f, &p.w_g, &p.w_o, &p.u_i, &p.u_f, &p.u_g, &p.u_o,
                            &p.b_i, &p.b_f, &p.b_g, &p.b_o})
        leaves.insert(*t, g.leaf(*t));
    const NodeId x = g.leaf(Tensor({1, input.size()}, input.data()));
    const NodeId h0 = g.leaf(Tensor({1, hidden}, state.h.data()));
    const NodeId c0 = g.leaf(Tensor({1, hidden}, state.c.data()));
    std::vector<NodeId> xs = {x};
    NodeId c_node = 0;
    std::vector<NodeId> hs = run_lstm_direction(g, leaves, p, xs, 1, hidden, false, h0, c0, &c_node);
    LSTMState out;
    out.h = Tensor::vector(g.value(hs[0]).data());
    out.c = Tensor::vector(g.value(c_node).data());
    return out;
}

Tensor bilstm_forward(const LSTMCellParams& fwd, const LSTMCellParams& bwd, const Tensor& seq) {
    if (seq.rank() != 2 || seq.rows() == 0) {
        throw ContractError("bilstm_forward needs a nonempty W x d sequence");
    }
    const std::size_t W = seq.rows(), d = seq.cols();
    const std::size_t hidden = fwd.u_i.cols();
    Graph g;
    LeafTable leaves(g);
    for (const LSTMCellParams* cell : {&fwd, &bwd})
        for (const Tensor* t : {&cell->w_i, &cell->w_f, &cell->w_g, &cell->w_o, &cell->u_i,
                                &cell->u_f, &cell->u_g, &cell->u_o, &cell->b_i, &cell->b_f,
                                &cell->b_g, &cell->b_o})
            leaves.insert(*t, g.leaf(*t));
    std::vector<NodeId> xs(W);
    for (std::size_t t = 0; t < W; ++t) {
        std::vector<double> row(seq.data().begin() + t * d, seq.data().begin() + (t + 1) * d);
        xs[t] = g.leaf(Tensor({1, d}, std::move(row)));
    }
    std::vector<NodeId> hf = run_lstm_direction(g, leaves, fwd, xs, 1, hidden, false);
    std::vector<NodeId> hb = run_lstm_direction(g, leaves, bwd, xs, 1, hidden, true);
    Tensor out({W, 2 * hidden});
    for (std::size_t t = 0; t < W; ++t) {
        const Tensor& f = g.value(hf[t]);
        const Tensor& b = g.value(hb[t]);
        for (std::size_t j = 0; j < hidden; ++j) {
            out.at(t, j) = f[j];
            out.at(t, hidden + j) = b[j];
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& v, const Tensor& gain, const Tensor& bias, double eps) {
    Graph g;
    const NodeId out = g.layer_norm_rows(g.leaf(v), g.leaf(gain), g.leaf(bias), eps);
    return g.value(out);
}

Tensor correct(const std::optional<CorrectorParams>& p, const Tensor& h, const Tensor& x) {
    if (!p) return h;
    const CorrectorParams& c = *p;
    if (h.rank() != 1 || x.rank() != 1 || c.w1.cols() != h.size() + x.size() ||
        c.w2.rows() != h.size()) {
        throw ConfigError("corrector dimensions do not match h/x");
    }
    Graph g;
    const NodeId hv = g.leaf(Tensor({1, h.size()}, h.data()));
    const NodeId xv = g.leaf(Tensor({1, x.size()}, x.data()));
    const NodeId cat[] = {hv, xv};
    const NodeId fin = g.concat(cat, 1);
    const NodeId a1 = g.relu(g.add_row(g.matmul(fin, g.transpose(g.leaf(c.w1))), g.leaf(c.b1)));
    const NodeId corr = g.add_row(g.matmul(a1, g.transpose(g.leaf(c.w2))), g.leaf(c.b2));
    const NodeId out = g.layer_norm_rows(g.add(hv, corr), g.leaf(c.ln_gain), g.leaf(c.ln_bias),
                                         kLayerNormEps);
    return Tensor::vector(g.value(out).data());
}

Tensor batch_step(const Tensor& batch, std::size_t t) {
    if (batch.rank() != 3) throw DimensionError("batch_step needs a B x W x F tensor");
    const std::size_t B = batch.shape()[0], W = batch.shape()[1], F = batch.shape()[2];
    if (t >= W) throw DimensionError("batch_step index out of range");
    Tensor out({B, F});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < F; ++j) out.at(b, j) = batch[b * W * F + t * F + j];
    return out;
}

double forward(const BiCLSTMParams& p, const ModelConfig& cfg, const Tensor& window) {
    if (window.rank() != 2) throw ConfigError("forward expects a W x F window");
    const std::size_t W = window.rows(), F = window.cols();
    std::vector<Tensor> steps(W);
    for (std::size_t t = 0; t < W; ++t) {
        std::vector<double> row(window.data().begin() + t * F,
                                window.data().begin() + (t + 1) * F);
        steps[t] = Tensor({1, F}, std::move(row));
    }
    Graph g;
    ForwardNodes nodes = build_forward(g, p, cfg, steps);
    return g.value(nodes.prediction)[0];
}

std::vector<double> forward_batch(const BiCLSTMParams& p, const ModelConfig& cfg,
                                  const Tensor& batch) {
    if (batch.rank() != 3) throw ConfigError("forward_batch expects a B x W x F tensor");
    const std::size_t B = batch.shape()[0], W = batch.shape()[1];
    if (B == 0) return {};
    std::vector<Tensor> steps(W);
    for (std::size_t t = 0; t < W; ++t) steps[t] = batch_step(batch, t);
    Graph g;
    ForwardNodes nodes = build_forward(g, p, cfg, steps);
    return g.value(nodes.prediction).data();
}

namespace {

json config_to_json(const ModelConfig& cfg) {
    return json{{"input_dim", cfg.input_dim},
                {"projection_dim", cfg.projection_dim},
                {"hidden_dim", cfg.hidden_dim},
                {"num_blocks", cfg.num_blocks},
                {"bidirectional", cfg.bidirectional},
                {"use_corrector", cfg.use_corrector},
                {"corrector_hidden_dim", cfg.corrector_hidden_dim},
                {"seed", cfg.seed}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.projection_dim = j.at("projection_dim").get<std::size_t>();
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    cfg.num_blocks = j.at("num_blocks").get<std::size_t>();
    cfg.bidirectional = j.at("bidirectional").get<bool>();
    cfg.use_corrector = j.at("use_corrector").get<bool>();
    cfg.corrector_hidden_dim = j.at("corrector_hidden_dim").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

}  // namespace

std::string config_digest(const ModelConfig& cfg) {
    return fnv1a_hex(config_to_json(cfg).dump());
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["format"] = "rulforge-checkpoint";
    j["version"] = 1;
    j["config"] = config_to_json(ckpt.config);
    j["seed"] = ckpt.config.seed;
    json params = json::array();
    for (const auto& [name, tensor] : named_params(ckpt.params)) {
        params.push_back(json{{"name", name},
                              {"shape", tensor->shape()},
                              {"data", doubles_to_hex(tensor->data())}});
    }
    j["params"] = std::move(params);
    j["metadata"] = ckpt.metadata_json.empty() ? json::object() : json::parse(ckpt.metadata_json);
    return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint parse failure: ") + e.what());
    }
    if (j.value("format", "") != std::string("rulforge-checkpoint")) {
        throw DataError("not a checkpoint file");
    }
    Checkpoint ckpt;
    ckpt.config = config_from_json(j.at("config"));
    validate(ckpt.config);
    ckpt.params = make_params(ckpt.config);
    auto named = named_params(ckpt.params);
    std::unordered_map<std::string, Tensor*> by_name;
    for (auto& [name, tensor] : named) by_name[name] = tensor;
    std::size_t loaded = 0;
    for (const auto& entry : j.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("checkpoint has unknown parameter " + name);
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != it->second->shape()) {
            throw DataError("checkpoint parameter " + name + " has shape " + shape_str(shape) +
                            ", expected " + shape_str(it->second->shape()));
        }
        std::vector<double> values = hex_to_doubles(entry.at("data").get<std::string>());
        if (values.size() != it->second->size()) {
            throw DataError("checkpoint parameter " + name + " has wrong value count");
        }
        it->second->data() = std::move(values);
        ++loaded;
    }
    if (loaded != named.size()) {
        throw DataError("checkpoint is missing parameters: expected " +
                        std::to_string(named.size()) + ", got " + std::to_string(loaded));
    }
    ckpt.metadata_json = j.value("metadata", json::object()).dump();
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint file for writing: " + path);
    out << checkpoint_to_json(ckpt);
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

}  // namespace rulforge
