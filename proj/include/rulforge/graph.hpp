#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rulforge/tensor.hpp"

namespace rulforge {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    Relu,
    Concat,
    ReduceMean,
    AddRow,
    LayerNormRows,
};

const char* op_name(Op op);

struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;       // allocated during backward(); same shape as value
    std::size_t axis = 0;  // Concat only
    double eps = 0.0;      // LayerNormRows only
};

// Reverse-mode tape. Nodes are appended in evaluation order, so ids strictly
// increase and every input id is smaller than its consumer: the graph is
// acyclic by construction. One graph per training step, never shared between
// threads.
class Graph {
public:
    NodeId leaf(Tensor value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);

    // Binary elementwise ops require equal shapes; the one exception is a
    // scalar (size-1) operand broadcast against a tensor.
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);

    NodeId sigmoid(NodeId a);
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);

    NodeId concat(std::span<const NodeId> parts, std::size_t axis);
    NodeId reduce_mean(NodeId a);

    // out[r, c] = matrix[r, c] + row[c]; explicit row broadcast.
    NodeId add_row(NodeId matrix, NodeId row);

    // Per-row layer normalization of a B x N matrix (or a single N-vector):
    // (x - mean) / sqrt(var + eps) * gain + bias, population variance.
    NodeId layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }

    // Reverse sweep from a scalar loss. Gradients accumulate additively at
    // fan-out nodes; every node reachable from the loss ends up with a
    // gradient of its value's shape.
    void backward(NodeId loss);

    std::size_t node_count() const { return nodes_.size(); }
    Op node_op(NodeId id) const { return nodes_[id].op; }
    const std::vector<NodeId>& node_inputs(NodeId id) const { return nodes_[id].inputs; }
    std::size_t count_ops(Op op) const;
    void reserve(std::size_t n) { nodes_.reserve(n); }

private:
    NodeId push(Node node);
    Tensor& grad_slot(NodeId id);
    void check_binary_shapes(const char* what, NodeId a, NodeId b) const;

    std::vector<Node> nodes_;
};

}  // namespace rulforge
