#include "rulforge/graph.hpp"

#include <cmath>
#include <string>

#include "rulforge/errors.hpp"

namespace rulforge {

namespace {

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Decompose a shape around `axis` for concat: copies happen as `outer`
// blocks of `dim * inner` contiguous values.
struct AxisSplit {
    std::size_t outer = 1, dim = 1, inner = 1;
};

AxisSplit split_shape(const std::vector<std::size_t>& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.dim = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::MatMul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Sigmoid: return "sigmoid";
        case Op::Tanh: return "tanh";
        case Op::Relu: return "relu";
        case Op::Concat: return "concat";
        case Op::ReduceMean: return "reduce_mean";
        case Op::AddRow: return "add_row";
        case Op::LayerNormRows: return "layer_norm_rows";
    }
    return "?";
}

NodeId Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Graph::grad_slot(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Graph::check_binary_shapes(const char* what, NodeId a, NodeId b) const {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.same_shape(tb) || ta.is_scalar() || tb.is_scalar()) return;
    throw DimensionError(std::string(what) + " shape mismatch: " + shape_str(ta.shape()) +
                         " vs " + shape_str(tb.shape()));
}

NodeId Graph::leaf(Tensor value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::MatMul;
    n.inputs = {a, b};
    n.value = matmul_values(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    Node n;
    n.op = Op::Transpose;
    n.inputs = {a};
    n.value = transpose_values(nodes_[a].value);
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    check_binary_shapes("add", a, b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    Node n;
    n.op = Op::Add;
    n.inputs = {a, b};
    if (ta.same_shape(tb)) {
        n.value = ta;
        for (std::size_t i = 0; i < tb.size(); ++i) n.value[i] += tb[i];
    } else if (tb.is_scalar()) {
        n.value = ta;
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += tb[0];
    } else {
        n.value = tb;
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += ta[0];
    }
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    check_binary_shapes("sub", a, b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    Node n;
    n.op = Op::Sub;
    n.inputs = {a, b};
    if (ta.same_shape(tb)) {
        n.value = ta;
        for (std::size_t i = 0; i < tb.size(); ++i) n.value[i] -= tb[i];
    } else if (tb.is_scalar()) {
        n.value = ta;
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= tb[0];
    } else {
        n.value = Tensor(tb.shape());
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = ta[0] - tb[i];
    }
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    check_binary_shapes("mul", a, b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    Node n;
    n.op = Op::Mul;
    n.inputs = {a, b};
    if (ta.same_shape(tb)) {
        n.value = ta;
        for (std::size_t i = 0; i < tb.size(); ++i) n.value[i] *= tb[i];
    } else if (tb.is_scalar()) {
        n.value = ta;
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= tb[0];
    } else {
        n.value = tb;
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= ta[0];
    }
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
    Node n;
    n.op = Op::Sigmoid;
    n.inputs = {a};
    n.value = nodes_[a].value;
    for (double& v : n.value.data()) v = sigmoid_scalar(v);
    return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
    Node n;
    n.op = Op::Tanh;
    n.inputs = {a};
    n.value = nodes_[a].value;
    for (double& v : n.value.data()) v = std::tanh(v);
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    Node n;
    n.op = Op::Relu;
    n.inputs = {a};
    n.value = nodes_[a].value;
    for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

NodeId Graph::concat(std::span<const NodeId> parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    const Tensor& first = nodes_[parts[0]].value;
    if (axis >= first.rank()) {
        throw DimensionError("concat axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(first.shape()));
    }
    std::vector<std::size_t> out_shape = first.shape();
    for (std::size_t p = 1; p < parts.size(); ++p) {
        const Tensor& t = nodes_[parts[p]].value;
        if (t.rank() != first.rank()) {
            throw DimensionError("concat rank mismatch: " + shape_str(first.shape()) + " vs " +
                                 shape_str(t.shape()));
        }
        for (std::size_t i = 0; i < t.rank(); ++i) {
            if (i == axis) continue;
            if (t.shape()[i] != first.shape()[i]) {
                throw DimensionError("concat shape mismatch off axis: " +
                                     shape_str(first.shape()) + " vs " + shape_str(t.shape()));
            }
        }
        out_shape[axis] += t.shape()[axis];
    }

    Node n;
    n.op = Op::Concat;
    n.inputs.assign(parts.begin(), parts.end());
    n.axis = axis;
    n.value = Tensor(out_shape);

    const AxisSplit out = split_shape(out_shape, axis);
    std::size_t offset = 0;  // running offset along the concat axis
    for (NodeId pid : n.inputs) {
        const Tensor& t = nodes_[pid].value;
        const AxisSplit in = split_shape(t.shape(), axis);
        for (std::size_t o = 0; o < in.outer; ++o) {
            const double* src = t.data().data() + o * in.dim * in.inner;
            double* dst = n.value.data().data() + (o * out.dim + offset) * out.inner;
            for (std::size_t i = 0; i < in.dim * in.inner; ++i) dst[i] = src[i];
        }
        offset += in.dim;
    }
    return push(std::move(n));
}

NodeId Graph::reduce_mean(NodeId a) {
    const Tensor& t = nodes_[a].value;
    if (t.size() == 0) throw DataError("reduce_mean of an empty tensor");
    double sum = 0.0;
    for (double v : t.data()) sum += v;
    Node n;
    n.op = Op::ReduceMean;
    n.inputs = {a};
    n.value = Tensor::scalar(sum / static_cast<double>(t.size()));
    return push(std::move(n));
}

NodeId Graph::add_row(NodeId matrix, NodeId row) {
    const Tensor& m = nodes_[matrix].value;
    const Tensor& r = nodes_[row].value;
    if (m.rank() != 2 || r.rank() != 1 || m.cols() != r.size()) {
        throw DimensionError("add_row shape mismatch: " + shape_str(m.shape()) + " vs " +
                             shape_str(r.shape()));
    }
    Node n;
    n.op = Op::AddRow;
    n.inputs = {matrix, row};
    n.value = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) n.value.at(i, j) += r[j];
    return push(std::move(n));
}

NodeId Graph::layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& g = nodes_[gain].value;
    const Tensor& b = nodes_[bias].value;
    const std::size_t width = xv.rank() == 1 ? xv.size() : xv.cols();
    const std::size_t nrows = xv.rank() == 1 ? 1 : xv.rows();
    if (xv.rank() > 2) {
        throw DimensionError("layer_norm_rows needs rank 1 or 2, got " + shape_str(xv.shape()));
    }
    if (width < 2) throw ContractError("layer_norm over fewer than 2 features is degenerate");
    if (g.rank() != 1 || g.size() != width || b.rank() != 1 || b.size() != width) {
        throw DimensionError("layer_norm gain/bias must be vectors of width " +
                             std::to_string(width));
    }
    Node n;
    n.op = Op::LayerNormRows;
    n.inputs = {x, gain, bias};
    n.eps = eps;
    n.value = Tensor(xv.shape());
    const double* src = xv.data().data();
    double* dst = n.value.data().data();
    const double inv_w = 1.0 / static_cast<double>(width);
    for (std::size_t r = 0; r < nrows; ++r) {
        const double* xr = src + r * width;
        double* yr = dst + r * width;
        double mean = 0.0;
        for (std::size_t j = 0; j < width; ++j) mean += xr[j];
        mean *= inv_w;
        double var = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var *= inv_w;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < width; ++j)
            yr[j] = (xr[j] - mean) * inv_std * g[j] + b[j];
    }
    return push(std::move(n));
}

std::size_t Graph::count_ops(Op op) const {
    std::size_t c = 0;
    for (const Node& n : nodes_)
        if (n.op == op) ++c;
    return c;
}

void Graph::backward(NodeId loss) {
    if (loss >= nodes_.size()) throw ContractError("backward: unknown loss node");
    if (!nodes_[loss].value.is_scalar()) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_str(nodes_[loss].value.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    grad_slot(loss)[0] = 1.0;

    for (NodeId id = loss + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) continue;  // not reachable from the loss
        const Tensor& out = n.value;
        const Tensor& gout = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const Tensor& b = nodes_[n.inputs[1]].value;
                Tensor da = matmul_values(gout, transpose_values(b));
                Tensor db = matmul_values(transpose_values(a), gout);
                Tensor& ga = grad_slot(n.inputs[0]);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += da[i];
                Tensor& gb = grad_slot(n.inputs[1]);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += db[i];
                break;
            }
            case Op::Transpose: {
                Tensor gt = transpose_values(gout);
                Tensor& ga = grad_slot(n.inputs[0]);
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gt[i];
                break;
            }
            case Op::Add: {
                for (int side = 0; side < 2; ++side) {
                    Tensor& g = grad_slot(n.inputs[side]);
                    if (g.size() == gout.size()) {
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gout[i];
                    } else {  // scalar side: sum all contributions
                        double s = 0.0;
                        for (double v : gout.data()) s += v;
                        g[0] += s;
                    }
                }
                break;
            }
            case Op::Sub: {
                Tensor& ga = grad_slot(n.inputs[0]);
                if (ga.size() == gout.size()) {
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i];
                } else {
                    double s = 0.0;
                    for (double v : gout.data()) s += v;
                    ga[0] += s;
                }
                Tensor& gb = grad_slot(n.inputs[1]);
                if (gb.size() == gout.size()) {
                    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gout[i];
                } else {
                    double s = 0.0;
                    for (double v : gout.data()) s += v;
                    gb[0] -= s;
                }
                break;
            }
            case Op::Mul: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                const Tensor& b = nodes_[n.inputs[1]].value;
                Tensor& ga = grad_slot(n.inputs[0]);
                if (ga.size() == gout.size()) {
                    if (b.is_scalar() && gout.size() != 1) {
                        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * b[0];
                    } else {
                        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * b[i];
                    }
                } else {
                    double s = 0.0;
                    for (std::size_t i = 0; i < gout.size(); ++i) s += gout[i] * b[i];
                    ga[0] += s;
                }
                Tensor& gb = grad_slot(n.inputs[1]);
                if (gb.size() == gout.size()) {
                    if (a.is_scalar() && gout.size() != 1) {
                        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * a[0];
                    } else {
                        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * a[i];
                    }
                } else {
                    double s = 0.0;
                    for (std::size_t i = 0; i < gout.size(); ++i) s += gout[i] * a[i];
                    gb[0] += s;
                }
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = grad_slot(n.inputs[0]);
                for (std::size_t i = 0; i < ga.size(); ++i)
                    ga[i] += gout[i] * out[i] * (1.0 - out[i]);
                break;
            }
            case Op::Tanh: {
                Tensor& ga = grad_slot(n.inputs[0]);
                for (std::size_t i = 0; i < ga.size(); ++i)
                    ga[i] += gout[i] * (1.0 - out[i] * out[i]);
                break;
            }
            case Op::Relu: {
                const Tensor& a = nodes_[n.inputs[0]].value;
                Tensor& ga = grad_slot(n.inputs[0]);
                // relu'(0) = 0 by convention
                for (std::size_t i = 0; i < ga.size(); ++i)
                    ga[i] += a[i] > 0.0 ? gout[i] : 0.0;
                break;
            }
            case Op::Concat: {
                const AxisSplit outsp = split_shape(out.shape(), n.axis);
                std::size_t offset = 0;
                for (NodeId pid : n.inputs) {
                    Tensor& g = grad_slot(pid);
                    const AxisSplit in = split_shape(nodes_[pid].value.shape(), n.axis);
                    for (std::size_t o = 0; o < in.outer; ++o) {
                        const double* src =
                            gout.data().data() + (o * outsp.dim + offset) * outsp.inner;
                        double* dst = g.data().data() + o * in.dim * in.inner;
                        for (std::size_t i = 0; i < in.dim * in.inner; ++i) dst[i] += src[i];
                    }
                    offset += in.dim;
                }
                break;
            }
            case Op::ReduceMean: {
                Tensor& ga = grad_slot(n.inputs[0]);
                const double share = gout[0] / static_cast<double>(ga.size());
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += share;
                break;
            }
            case Op::AddRow: {
                Tensor& gm = grad_slot(n.inputs[0]);
                for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += gout[i];
                Tensor& gr = grad_slot(n.inputs[1]);
                const std::size_t ncols = gr.size();
                const std::size_t nrows = gm.size() / ncols;
                for (std::size_t r = 0; r < nrows; ++r)
                    for (std::size_t j = 0; j < ncols; ++j) gr[j] += gout[r * ncols + j];
                break;
            }
            case Op::LayerNormRows: {
                const Tensor& xv = nodes_[n.inputs[0]].value;
                const Tensor& g = nodes_[n.inputs[1]].value;
                const std::size_t width = xv.rank() == 1 ? xv.size() : xv.cols();
                const std::size_t nrows = xv.size() / width;
                const double inv_w = 1.0 / static_cast<double>(width);
                Tensor& gx = grad_slot(n.inputs[0]);
                Tensor& gg = grad_slot(n.inputs[1]);
                Tensor& gb = grad_slot(n.inputs[2]);
                for (std::size_t r = 0; r < nrows; ++r) {
                    const double* xr = xv.data().data() + r * width;
                    const double* go = gout.data().data() + r * width;
                    double mean = 0.0;
                    for (std::size_t j = 0; j < width; ++j) mean += xr[j];
                    mean *= inv_w;
                    double var = 0.0;
                    for (std::size_t j = 0; j < width; ++j) {
                        const double d = xr[j] - mean;
                        var += d * d;
                    }
                    var *= inv_w;
                    const double inv_std = 1.0 / std::sqrt(var + n.eps);
                    // y = normalized x; ghat = gout * gain
                    double ghat_mean = 0.0, ghat_y_mean = 0.0;
                    for (std::size_t j = 0; j < width; ++j) {
                        const double y = (xr[j] - mean) * inv_std;
                        const double gh = go[j] * g[j];
                        ghat_mean += gh;
                        ghat_y_mean += gh * y;
                        gg[j] += go[j] * y;
                        gb[j] += go[j];
                    }
                    ghat_mean *= inv_w;
                    ghat_y_mean *= inv_w;
                    double* gxr = gx.data().data() + r * width;
                    for (std::size_t j = 0; j < width; ++j) {
                        const double y = (xr[j] - mean) * inv_std;
                        const double gh = go[j] * g[j];
                        gxr[j] += (gh - ghat_mean - y * ghat_y_mean) * inv_std;
                    }
                }
                break;
            }
        }
    }
}

}  // namespace rulforge
