#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rulforge/errors.hpp"
#include "rulforge/graph.hpp"
#include "rulforge/rng.hpp"
#include "rulforge/tensor.hpp"

#include "fd_check.hpp"

using namespace rulforge;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Plain ijk triple loop, written independently of the library's kernel.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
            out.at(i, j) = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("tensor shape/data invariant") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    Tensor s = Tensor::scalar(4.5);
    CHECK(s.is_scalar());
    CHECK(s[0] == 4.5);
}

TEST_CASE("matmul identity and direct substitution") {
    Graph g;
    const NodeId eye = g.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
    const NodeId m = g.leaf(Tensor({2, 2}, {1, 2, 3, 4}));
    const Tensor& prod = g.value(g.matmul(eye, m));
    CHECK(prod.data() == std::vector<double>{1, 2, 3, 4});

    const NodeId a = g.leaf(Tensor({1, 2}, {1, 2}));
    const NodeId b = g.leaf(Tensor({2, 1}, {3, 4}));
    CHECK(g.value(g.matmul(a, b))[0] == 11.0);
}

TEST_CASE("matmul against naive triple loop") {
    Rng rng(7);
    const Tensor a = random_tensor({5, 7}, rng);
    const Tensor b = random_tensor({7, 3}, rng);
    Graph g;
    const Tensor& got = g.value(g.matmul(g.leaf(a), g.leaf(b)));
    const Tensor want = naive_matmul(a, b);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Graph g;
    const NodeId a = g.leaf(Tensor({2, 3}));
    const NodeId b = g.leaf(Tensor({2, 3}));
    try {
        g.matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(2, 3)") != std::string::npos);
    }
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(11);
    std::vector<Tensor> inputs = {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)};
    const double err = fdcheck::max_grad_err(inputs, [](Graph& g, const std::vector<NodeId>& in) {
        return g.reduce_mean(g.mul(g.matmul(in[0], in[1]), g.matmul(in[0], in[1])));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("elementwise basics") {
    Graph g;
    const Tensor& r = g.value(g.relu(g.leaf(Tensor::vector({-1, 0, 2}))));
    CHECK(r.data() == std::vector<double>{0, 0, 2});
    CHECK(g.value(g.sigmoid(g.leaf(Tensor::scalar(0))))[0] == 0.5);
    CHECK(g.value(g.tanh(g.leaf(Tensor::scalar(0))))[0] == 0.0);
}

TEST_CASE("binary elementwise requires equal shapes except scalar") {
    Graph g;
    const NodeId a = g.leaf(Tensor({2, 2}));
    const NodeId b = g.leaf(Tensor({2, 3}));
    CHECK_THROWS_AS(g.add(a, b), DimensionError);
    const NodeId s = g.leaf(Tensor::scalar(2.0));
    const NodeId c = g.leaf(Tensor({2, 2}, {1, 2, 3, 4}));
    CHECK(g.value(g.mul(s, c)).data() == std::vector<double>{2, 4, 6, 8});
    CHECK(g.value(g.mul(c, s)).data() == std::vector<double>{2, 4, 6, 8});
}

TEST_CASE("mul gradient matches finite differences") {
    Rng rng(13);
    std::vector<Tensor> inputs = {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
    const double err = fdcheck::max_grad_err(inputs, [](Graph& g, const std::vector<NodeId>& in) {
        return g.reduce_mean(g.mul(in[0], in[1]));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("scalar broadcast gradients match finite differences") {
    Rng rng(17);
    std::vector<Tensor> inputs = {Tensor::scalar(0.7), random_tensor({2, 3}, rng)};
    for (auto build : {
             fdcheck::BuildFn([](Graph& g, const std::vector<NodeId>& in) {
                 return g.reduce_mean(g.mul(in[0], g.mul(in[1], in[1])));
             }),
             fdcheck::BuildFn([](Graph& g, const std::vector<NodeId>& in) {
                 return g.reduce_mean(g.mul(g.add(in[1], in[0]), g.sub(in[1], in[0])));
             }),
         }) {
        CHECK(fdcheck::max_grad_err(inputs, build) < 1e-6);
    }
}

TEST_CASE("activation gradients match finite differences") {
    Rng rng(19);
    // Keep relu inputs away from the kink; finite differences straddle it.
    Tensor x = random_tensor({3, 3}, rng);
    for (double& v : x.data())
        if (std::abs(v) < 0.05) v = 0.1;
    const double err = fdcheck::max_grad_err({x}, [](Graph& g, const std::vector<NodeId>& in) {
        return g.reduce_mean(g.mul(g.relu(in[0]), g.add(g.sigmoid(in[0]), g.tanh(in[0]))));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("relu gradient at exactly zero is zero") {
    Graph g;
    const NodeId x = g.leaf(Tensor::vector({0.0, -1.0, 2.0}));
    g.backward(g.reduce_mean(g.relu(x)));
    const Tensor& dx = g.grad(x);
    CHECK(dx[0] == 0.0);
    CHECK(dx[1] == 0.0);
    CHECK(dx[2] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("concat definition and identity") {
    Graph g;
    const NodeId a = g.leaf(Tensor({2, 1}, {1, 2}));
    const NodeId b = g.leaf(Tensor({2, 1}, {3, 4}));
    const NodeId parts[] = {a, b};
    CHECK(g.value(g.concat(parts, 1)).data() == std::vector<double>{1, 3, 2, 4});
    const NodeId one[] = {a};
    CHECK(g.value(g.concat(one, 1)).data() == g.value(a).data());
    const NodeId bad[] = {a, g.leaf(Tensor({3, 1}))};
    CHECK_THROWS_AS(g.concat(bad, 1), DimensionError);
}

TEST_CASE("concat backward splits at offsets") {
    // Round trip: the gradient flowing back to each part must be exactly the
    // slice of the upstream gradient that the part produced.
    Rng rng(23);
    const Tensor a = random_tensor({2, 2}, rng);
    const Tensor b = random_tensor({2, 3}, rng);
    Graph g;
    const NodeId na = g.leaf(a), nb = g.leaf(b);
    const NodeId parts[] = {na, nb};
    const NodeId cat = g.concat(parts, 1);
    const NodeId w = g.leaf(Tensor({2, 5}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
    g.backward(g.reduce_mean(g.mul(cat, w)));
    const Tensor& da = g.grad(na);
    const Tensor& db = g.grad(nb);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(da.at(i, j) == doctest::Approx(g.value(w).at(i, j) / 10.0));
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(db.at(i, j) == doctest::Approx(g.value(w).at(i, 2 + j) / 10.0));
    }

    const double err = fdcheck::max_grad_err({a, b}, [](Graph& g2, const std::vector<NodeId>& in) {
        const NodeId p[] = {in[0], in[1]};
        const NodeId c = g2.concat(p, 1);
        return g2.reduce_mean(g2.mul(c, c));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("concat along axis 0") {
    Rng rng(29);
    const Tensor a = random_tensor({1, 3}, rng);
    const Tensor b = random_tensor({2, 3}, rng);
    Graph g;
    const NodeId parts[] = {g.leaf(a), g.leaf(b)};
    const Tensor& cat = g.value(g.concat(parts, 0));
    CHECK(cat.rows() == 3);
    CHECK(cat.at(0, 1) == a.at(0, 1));
    CHECK(cat.at(2, 2) == b.at(1, 2));
}

TEST_CASE("reduce_mean value and gradient") {
    Graph g;
    CHECK(g.value(g.reduce_mean(g.leaf(Tensor::vector({2, 2, 2}))))[0] == 2.0);
    CHECK(g.value(g.reduce_mean(g.leaf(Tensor::vector({1, 2, 3}))))[0] == 2.0);
    CHECK_THROWS_AS(g.reduce_mean(g.leaf(Tensor({0}))), DataError);

    // d/dx_i mean(x^2) = 2 x_i / N
    const NodeId x = g.leaf(Tensor::vector({1, 2}));
    g.backward(g.reduce_mean(g.mul(x, x)));
    CHECK(g.grad(x)[0] == doctest::Approx(1.0));
    CHECK(g.grad(x)[1] == doctest::Approx(2.0));
}

TEST_CASE("backward of a bare parameter is one") {
    Graph g;
    const NodeId p = g.leaf(Tensor::scalar(3.25));
    g.backward(p);
    CHECK(g.grad(p)[0] == 1.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Graph g;
    const NodeId v = g.leaf(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(g.backward(v), ContractError);
}

TEST_CASE("linear regression gradients match finite differences") {
    Rng rng(31);
    const Tensor w = random_tensor({2, 4}, rng);
    const Tensor x = random_tensor({4, 3}, rng);
    const Tensor y = random_tensor({2, 3}, rng);
    const double err = fdcheck::max_grad_err({w, x, y}, [](Graph& g, const std::vector<NodeId>& in) {
        const NodeId r = g.sub(g.matmul(in[0], in[1]), in[2]);
        return g.reduce_mean(g.mul(r, r));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("add_row broadcast and gradient") {
    Graph g;
    const NodeId m = g.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    const NodeId r = g.leaf(Tensor::vector({10, 20, 30}));
    CHECK(g.value(g.add_row(m, r)).data() == std::vector<double>{11, 22, 33, 14, 25, 36});

    Rng rng(37);
    const double err = fdcheck::max_grad_err(
        {random_tensor({3, 4}, rng), random_tensor({4}, rng)},
        [](Graph& g2, const std::vector<NodeId>& in) {
            const NodeId s = g2.add_row(in[0], in[1]);
            return g2.reduce_mean(g2.mul(s, s));
        });
    CHECK(err < 1e-6);
}

TEST_CASE("layer_norm_rows forward properties and gradient") {
    Rng rng(41);
    const Tensor x = random_tensor({3, 6}, rng);
    Tensor gain({6});
    gain.fill(1.0);
    Tensor bias({6});
    Graph g;
    const Tensor& y = g.value(g.layer_norm_rows(g.leaf(x), g.leaf(gain), g.leaf(bias), 1e-5));
    for (std::size_t i = 0; i < 3; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 6; ++j) mean += y.at(i, j);
        mean /= 6.0;
        for (std::size_t j = 0; j < 6; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
        var /= 6.0;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

    const Tensor g2t = random_tensor({6}, rng, 0.5, 1.5);
    const Tensor b2t = random_tensor({6}, rng);
    const double err = fdcheck::max_grad_err({x, g2t, b2t}, [](Graph& gg, const std::vector<NodeId>& in) {
        const NodeId n = gg.layer_norm_rows(in[0], in[1], in[2], 1e-5);
        return gg.reduce_mean(gg.mul(n, n));
    });
    CHECK(err < 1e-5);
}

TEST_CASE("fan-out gradients accumulate additively") {
    Graph g;
    const NodeId x = g.leaf(Tensor::vector({1.0, 2.0}));
    // x feeds two consumers; d/dx [mean(x*x) + mean(x*x)] = 2 * (2x/N)
    const NodeId a = g.reduce_mean(g.mul(x, x));
    const NodeId b = g.reduce_mean(g.mul(x, x));
    g.backward(g.add(a, b));
    CHECK(g.grad(x)[0] == doctest::Approx(2.0));
    CHECK(g.grad(x)[1] == doctest::Approx(4.0));
}

TEST_CASE("unrolled 5-step lstm gradients match finite differences") {
    // Hand-rolled single cell, hidden width 3, input width 2, batch 1.
    Rng rng(43);
    const std::size_t H = 3, D = 2, W = 5;
    std::vector<Tensor> inputs;
    for (int i = 0; i < 4; ++i) inputs.push_back(random_tensor({H, D}, rng, -0.5, 0.5));  // w gates
    for (int i = 0; i < 4; ++i) inputs.push_back(random_tensor({H, H}, rng, -0.5, 0.5));  // u gates
    for (int i = 0; i < 4; ++i) inputs.push_back(random_tensor({H}, rng, -0.1, 0.1));     // biases
    for (std::size_t t = 0; t < W; ++t) inputs.push_back(random_tensor({1, D}, rng));     // sequence

    auto build = [=](Graph& g, const std::vector<NodeId>& in) {
        NodeId h = g.leaf(Tensor({1, H}));
        NodeId c = g.leaf(Tensor({1, H}));
        for (std::size_t t = 0; t < W; ++t) {
            const NodeId x = in[12 + t];
            auto gate = [&](int k) {
                return g.add_row(g.add(g.matmul(x, g.transpose(in[k])),
                                       g.matmul(h, g.transpose(in[4 + k]))),
                                 in[8 + k]);
            };
            const NodeId gi = g.sigmoid(gate(0));
            const NodeId gf = g.sigmoid(gate(1));
            const NodeId gg = g.tanh(gate(2));
            const NodeId go = g.sigmoid(gate(3));
            c = g.add(g.mul(gf, c), g.mul(gi, gg));
            h = g.mul(go, g.tanh(c));
        }
        return g.reduce_mean(g.mul(h, h));
    };
    CHECK(fdcheck::max_grad_err(inputs, build) < 1e-4);
}

TEST_CASE("graph node ids increase and inputs precede consumers") {
    Rng rng(47);
    Graph g;
    const NodeId a = g.leaf(random_tensor({2, 2}, rng));
    const NodeId b = g.leaf(random_tensor({2, 2}, rng));
    const NodeId parts[] = {g.sigmoid(a), g.tanh(b)};
    g.reduce_mean(g.mul(g.concat(parts, 1), g.concat(parts, 1)));
    for (NodeId id = 0; id < g.node_count(); ++id) {
        for (NodeId in : g.node_inputs(id)) CHECK(in < id);
    }
}

TEST_CASE("identical inputs give bit-identical outputs and gradients") {
    auto run = [](std::vector<double>& grads) {
        Rng rng(53);
        Graph g;
        const NodeId w = g.leaf(Tensor({3, 3}, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8, 0.9}));
        const NodeId x = g.leaf(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
        const NodeId noise = g.leaf(Tensor({3, 2}, {rng.normal(), rng.normal(), rng.normal(),
                                                    rng.normal(), rng.normal(), rng.normal()}));
        const NodeId y = g.tanh(g.add(g.matmul(w, x), noise));
        g.backward(g.reduce_mean(g.mul(y, y)));
        grads = g.grad(w).data();
        return g.value(y).data();
    };
    std::vector<double> g1, g2;
    const std::vector<double> v1 = run(g1);
    const std::vector<double> v2 = run(g2);
    CHECK(v1 == v2);
    CHECK(g1 == g2);
}

TEST_CASE("forward ops on finite inputs stay finite") {
    Rng rng(59);
    Graph g;
    const NodeId x = g.leaf(random_tensor({4, 4}, rng, -50.0, 50.0));
    const NodeId y = g.sigmoid(g.mul(x, x));
    CHECK(g.value(y).all_finite());
    const NodeId z = g.tanh(g.matmul(x, x));
    CHECK(g.value(z).all_finite());
}
