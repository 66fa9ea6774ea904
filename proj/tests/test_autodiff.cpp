// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "warmlab/autodiff.hpp"
#include "warmlab/error.hpp"
#include "warmlab/model.hpp"

using namespace warmlab;
using namespace warmlab::ad;
using warmlab::testing::Gen;
using warmlab::testing::rel_close;

namespace {

// Straightforward mean cross-entropy in long double, written independently of
// the tape's stabilized kernel.
long double naive_cross_entropy(const Tensor& z, const std::vector<int>& labels, long double smoothing = 0) {
    const auto n = z.rows();
    const auto c = z.cols();
    long double total = 0;
    for (std::size_t r = 0; r < n; ++r) {
        long double denom = 0;
        for (std::size_t k = 0; k < c; ++k) denom += std::exp(static_cast<long double>(z.at(r, k)));
        for (std::size_t k = 0; k < c; ++k) {
            const long double q = (k == static_cast<std::size_t>(labels[r]) ? 1 - smoothing : 0) + smoothing / c;
            const long double logp = static_cast<long double>(z.at(r, k)) - std::log(denom);
            total -= q * logp;
        }
    }
    return total / n;
}

// Weighted sum with fixed random weights, so every output entry reaches the
// loss with a distinct coefficient.
Var probe_loss(Tape& tape, Var out, std::uint64_t seed) {
    Gen gen(seed);
    Var weights = tape.leaf(gen.tensor(tape.value(out).shape()));
    return tape.sum(tape.mul(out, weights));
}

}  // namespace

TEST_CASE("tensor construction") {
    CHECK_THROWS_AS(Tensor({2, 0}, {}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({}, {}), ShapeError);
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at(1, 2) == 6);
    CHECK(Tensor({2}, {3, 4}).norm() == 5.0);
    CHECK_THROWS_AS(t.item(), ContractError);
}

TEST_CASE("primitive forward values") {
    Tape tape;
    SUBCASE("matmul by identity") {
        Gen gen(1);
        const auto a = gen.tensor({3, 3});
        Var i3 = tape.leaf(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
        CHECK(tape.value(tape.matmul(i3, tape.leaf(a))) == a);
    }
    SUBCASE("relu") {
        Var r = tape.relu(tape.leaf(Tensor({3}, {-1, 0, 2})));
        CHECK(tape.value(r) == Tensor({3}, {0, 0, 2}));
    }
    SUBCASE("layer norm of a constant row is zero") {
        Var x = tape.leaf(Tensor({2, 4}, {3, 3, 3, 3, -1, -1, -1, -1}));
        Var y = tape.layer_norm(x, tape.leaf(Tensor::filled({4}, 1.0)), tape.leaf(Tensor::zeros({4})));
        CHECK(tape.value(y) == Tensor::zeros({2, 4}));
    }
    SUBCASE("layer norm standardizes rows") {
        Var x = tape.leaf(Tensor({1, 4}, {1, 2, 3, 4}));
        Var y = tape.layer_norm(x, tape.leaf(Tensor::filled({4}, 2.0)), tape.leaf(Tensor::filled({4}, 0.5)));
        const double sd = std::sqrt(1.25 + Tape::kLayerNormEpsilon);
        for (int k = 0; k < 4; ++k) CHECK(rel_close(tape.value(y)[k], 2.0 * (k + 1 - 2.5) / sd + 0.5, 1e-14));
    }
    SUBCASE("add broadcasts a bias vector over rows") {
        Var y = tape.add(tape.leaf(Tensor({2, 2}, {1, 2, 3, 4})), tape.leaf(Tensor({2}, {10, 20})));
        CHECK(tape.value(y) == Tensor({2, 2}, {11, 22, 13, 24}));
    }
    SUBCASE("residual add and mul") {
        Var a = tape.leaf(Tensor({2}, {1, 2}));
        Var b = tape.leaf(Tensor({2}, {3, 5}));
        CHECK(tape.value(tape.residual_add(a, b)) == Tensor({2}, {4, 7}));
        CHECK(tape.value(tape.mul(a, b)) == Tensor({2}, {3, 10}));
    }
}

TEST_CASE("shape errors list both shapes") {
    Tape tape;
    Var a = tape.leaf(Tensor::zeros({2, 3}));
    Var b = tape.leaf(Tensor::zeros({2, 3}));
    try {
        tape.matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3] and [2x3]") != std::string::npos);
        CHECK(msg.find("matmul") != std::string::npos);
    }
    CHECK_THROWS_AS(tape.add(a, tape.leaf(Tensor::zeros({2}))), ShapeError);
    CHECK_THROWS_AS(tape.residual_add(a, tape.leaf(Tensor::zeros({3, 2}))), ShapeError);
    CHECK_THROWS_AS(tape.mul(a, tape.leaf(Tensor::zeros({6}))), ShapeError);
    CHECK_THROWS_AS(tape.layer_norm(a, tape.leaf(Tensor::zeros({2})), tape.leaf(Tensor::zeros({3}))), ShapeError);
}

TEST_CASE("softmax cross-entropy") {
    SUBCASE("uniform logits") {
        Tape tape;
        const std::vector<int> labels{0, 1, 2, 3};
        Var loss = tape.softmax_cross_entropy(tape.leaf(Tensor::filled({4, 4}, 0.7)), labels);
        CHECK(rel_close(tape.value(loss).item(), std::log(4.0), 1e-15));
    }
    SUBCASE("dominant correct logit") {
        Tape tape;
        Tensor z = Tensor::zeros({2, 3});
        z.at(0, 1) = 1e3;
        z.at(1, 2) = 1e3;
        Var loss = tape.softmax_cross_entropy(tape.leaf(z), std::vector<int>{1, 2});
        CHECK(tape.value(loss).item() < 1e-300);
        CHECK(tape.value(loss).item() >= 0.0);
    }
    SUBCASE("random 5x3 against an independent evaluation") {
        Gen gen(53);
        for (int trial = 0; trial < 10; ++trial) {
            const auto z = gen.tensor({5, 3}, 3.0);
            std::vector<int> labels;
            for (int r = 0; r < 5; ++r) labels.push_back(static_cast<int>(gen.integer(0, 2)));
            Tape tape;
            Var loss = tape.softmax_cross_entropy(tape.leaf(z), labels);
            CHECK(rel_close(tape.value(loss).item(), static_cast<double>(naive_cross_entropy(z, labels)), 1e-12));

            Tape smooth;
            Var sloss = smooth.softmax_cross_entropy(smooth.leaf(z), labels, 0.1);
            CHECK(rel_close(smooth.value(sloss).item(),
                            static_cast<double>(naive_cross_entropy(z, labels, 0.1L)), 1e-12));
        }
    }
    SUBCASE("gradient is (softmax - target) / n") {
        Gen gen(54);
        const auto z = gen.tensor({5, 3});
        const std::vector<int> labels{0, 2, 1, 1, 0};
        Tape tape;
        Var zv = tape.leaf(z);
        tape.backward(tape.softmax_cross_entropy(zv, labels));
        for (std::size_t r = 0; r < 5; ++r) {
            double denom = 0;
            for (std::size_t k = 0; k < 3; ++k) denom += std::exp(z.at(r, k));
            for (std::size_t k = 0; k < 3; ++k) {
                const double expected =
                    (std::exp(z.at(r, k)) / denom - (static_cast<int>(k) == labels[r] ? 1.0 : 0.0)) / 5.0;
                CHECK(std::abs(tape.grad(zv).at(r, k) - expected) < 1e-15);
            }
        }
    }
    SUBCASE("label errors") {
        Tape tape;
        Var z = tape.leaf(Tensor::zeros({2, 3}));
        CHECK_THROWS_AS(tape.softmax_cross_entropy(z, std::vector<int>{0, 3}), IndexError);
        CHECK_THROWS_AS(tape.softmax_cross_entropy(z, std::vector<int>{-1, 0}), IndexError);
        CHECK_THROWS_AS(tape.softmax_cross_entropy(z, std::vector<int>{0}), ShapeError);
        CHECK_THROWS_AS(tape.softmax_cross_entropy(z, std::vector<int>{0, 1}, 1.0), ContractError);
    }
}

TEST_CASE("backward basics") {
    SUBCASE("sum gives ones") {
        Tape tape;
        Var x = tape.leaf(Tensor({2, 2}, {1, -2, 3, 4}));
        tape.backward(tape.sum(x));
        CHECK(tape.grad(x) == Tensor::filled({2, 2}, 1.0));
    }
    SUBCASE("x*x gives 2x") {
        Tape tape;
        Var x = tape.leaf(Tensor::scalar(1.75));
        tape.backward(tape.mul(x, x));
        CHECK(tape.grad(x).item() == 3.5);
    }
    SUBCASE("non-scalar loss") {
        Tape tape;
        Var x = tape.leaf(Tensor::zeros({3}));
        CHECK_THROWS_AS(tape.backward(x), ContractError);
    }
    SUBCASE("grad before backward") {
        Tape tape;
        Var x = tape.leaf(Tensor::zeros({3}));
        CHECK_THROWS_AS(tape.grad(x), ContractError);
    }
    SUBCASE("topological order") {
        Tape tape;
        Var x = tape.leaf(Tensor::zeros({2, 2}));
        Var y = tape.relu(tape.matmul(x, x));
        Var z = tape.sum(tape.residual_add(x, y));
        for (std::size_t id = 0; id <= z.id; ++id)
            for (auto in : tape.inputs(Var{id})) CHECK(in < id);
    }
}

TEST_CASE("property: every primitive matches central differences") {
    constexpr double h = 1e-5;
    constexpr double tol = 1e-4;
    Gen gen(77);
    for (int trial = 0; trial < 10; ++trial) {
        CAPTURE(trial);
        const auto seed = static_cast<std::uint64_t>(1000 + trial);
        const auto a = gen.tensor({4, 3});
        const auto b = gen.tensor({4, 3});
        const auto m = gen.tensor({3, 5});
        const auto bias = gen.tensor({3});
        const auto gain = gen.tensor({3});

        std::vector<std::pair<const char*, ScalarFn>> cases{
            {"add", [&](Tape& t, Var x) { return probe_loss(t, t.add(x, t.leaf(b)), seed); }},
            {"add bias", [&](Tape& t, Var x) { return probe_loss(t, t.add(t.leaf(a), x), seed); }},
            {"residual_add", [&](Tape& t, Var x) { return probe_loss(t, t.residual_add(x, t.leaf(b)), seed); }},
            {"mul", [&](Tape& t, Var x) { return probe_loss(t, t.mul(x, t.leaf(b)), seed); }},
            {"mul self", [&](Tape& t, Var x) { return probe_loss(t, t.mul(x, x), seed); }},
            {"matmul lhs", [&](Tape& t, Var x) { return probe_loss(t, t.matmul(x, t.leaf(m)), seed); }},
            {"relu", [&](Tape& t, Var x) { return probe_loss(t, t.relu(x), seed); }},
            {"layer_norm x",
             [&](Tape& t, Var x) { return probe_loss(t, t.layer_norm(x, t.leaf(gain), t.leaf(bias)), seed); }},
            {"sum", [&](Tape& t, Var x) { return t.sum(t.mul(x, x)); }},
            {"cross-entropy",
             [&](Tape& t, Var x) { return t.softmax_cross_entropy(x, std::vector<int>{0, 2, 1, 2}, 0.1); }},
        };
        for (const auto& [name, fn] : cases) {
            CAPTURE(name);
            const auto x = std::string(name) == "add bias" ? bias : a;
            const auto report = grad_check(fn, x, h, tol);
            CHECK(report.passed);
            CHECK(report.max_rel_error < tol);
        }

        // Gradients with respect to the second operand / affine parameters.
        const auto rhs = grad_check([&](Tape& t, Var x) { return probe_loss(t, t.matmul(t.leaf(a), x), seed); },
                                    gen.tensor({3, 2}), h, tol);
        CHECK(rhs.passed);
        const auto ln_gain = grad_check(
            [&](Tape& t, Var g) { return probe_loss(t, t.layer_norm(t.leaf(a), g, t.leaf(bias)), seed); }, gain, h,
            tol);
        CHECK(ln_gain.passed);
        const auto ln_bias = grad_check(
            [&](Tape& t, Var bb) { return probe_loss(t, t.layer_norm(t.leaf(a), t.leaf(gain), bb), seed); }, bias,
            h, tol);
        CHECK(ln_bias.passed);
    }
}

TEST_CASE("property: adjoints are linear") {
    Gen gen(88);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x0 = gen.tensor({3, 4});
        const auto w0 = gen.tensor({4, 4});
        const auto r0 = gen.tensor({3, 4});
        auto f = [&](Tape& t, Var x, Var w) { return t.sum(t.mul(t.relu(t.matmul(x, w)), t.leaf(r0))); };
        auto g = [&](Tape& t, Var x, Var w) {
            Var normed = t.layer_norm(t.matmul(x, w), t.leaf(Tensor::filled({4}, 1.5)), t.leaf(Tensor::zeros({4})));
            return t.sum(t.mul(normed, t.leaf(r0)));
        };
        auto grads = [&](auto&& fn) {
            Tape t;
            Var x = t.leaf(x0);
            Var w = t.leaf(w0);
            t.backward(fn(t, x, w));
            return std::make_pair(t.grad(x), t.grad(w));
        };
        const auto [fx, fw] = grads(f);
        const auto [gx, gw] = grads(g);
        const auto [sx, sw] = grads([&](Tape& t, Var x, Var w) { return t.add(f(t, x, w), g(t, x, w)); });
        for (std::size_t i = 0; i < sx.size(); ++i) CHECK(std::abs(sx[i] - (fx[i] + gx[i])) <= 1e-12);
        for (std::size_t i = 0; i < sw.size(); ++i) CHECK(std::abs(sw[i] - (fw[i] + gw[i])) <= 1e-12);
    }
}

TEST_CASE("property: forward and backward are deterministic and replayable") {
    model::StackConfig c;
    c.normalize_subcomponents = true;
    const auto net = model::ToyModel::build(c);
    Gen gen(5);
    const auto batch = gen.tensor({7, static_cast<std::size_t>(c.input_dim)});
    const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2};

    auto run = [&] {
        Tape tape;
        auto pass = model::forward(tape, net, batch);
        Var loss = tape.softmax_cross_entropy(pass.logits, labels);
        tape.backward(loss);
        std::vector<Tensor> values;
        for (std::size_t id = 0; id < tape.size(); ++id) values.push_back(tape.value(Var{id}));
        std::vector<Tensor> grads;
        for (auto p : pass.params) grads.push_back(tape.grad(p));
        return std::make_tuple(tape.size(), values, grads);
    };
    const auto first = run();
    const auto second = run();
    CHECK(std::get<0>(first) == std::get<0>(second));
    CHECK(std::get<1>(first) == std::get<1>(second));
    CHECK(std::get<2>(first) == std::get<2>(second));
}

TEST_CASE("grad_check") {
    SUBCASE("quadratic form passes tightly") {
        const Tensor q({3, 3}, {2, 0.5, 0, 0.5, 3, -1, 0, -1, 4});
        auto f = [&](Tape& t, Var x) { return t.sum(t.mul(t.matmul(x, t.leaf(q)), x)); };
        const auto report = grad_check(f, Tensor({1, 3}, {0.3, -1.2, 2.0}), 1e-5, 1e-6);
        CHECK(report.passed);
        CHECK(report.checked == 3);
        CHECK(report.nondifferentiable.empty());
    }
    SUBCASE("relu away from its kink") {
        auto f = [](Tape& t, Var x) { return t.sum(t.mul(t.relu(x), x)); };
        const auto report = grad_check(f, Tensor({4}, {-1.0, 0.5, 2.0, -0.25}), 1e-5, 1e-6);
        CHECK(report.passed);
        CHECK(report.nondifferentiable.empty());
    }
    SUBCASE("relu exactly at zero is excluded") {
        auto f = [](Tape& t, Var x) { return t.sum(t.relu(x)); };
        const auto report = grad_check(f, Tensor({3}, {1.0, 0.0, -1.0}), 1e-5, 1e-6);
        CHECK(report.nondifferentiable == std::vector<std::size_t>{1});
        CHECK(report.checked == 2);
        CHECK(report.passed);
    }
    SUBCASE("non-finite values name the coordinate") {
        auto f = [](Tape& t, Var x) { return t.sum(t.mul(t.mul(x, x), t.leaf(Tensor({2}, {1.0, 1e10})))); };
        try {
            grad_check(f, Tensor::zeros({2}), 1e150, 1e-6);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(e.index() == 1);
        }
        auto g = [](Tape& t, Var x) { return t.sum(t.mul(x, x)); };
        CHECK_THROWS_AS(grad_check(g, Tensor({1}, {1e300}), 1e-5, 1e-6), NumericError);
    }
    SUBCASE("bad step") {
        auto g = [](Tape& t, Var x) { return t.sum(x); };
        CHECK_THROWS_AS(grad_check(g, Tensor::zeros({1}), 0.0, 1e-6), ContractError);
    }
}

TEST_CASE("toy model gradient matches finite differences") {
    for (bool normalized : {false, true}) {
        CAPTURE(normalized);
        model::StackConfig c{2, 2, 8, normalized, 1.0, 0, 3, 4};
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            c.seed = seed;
            const auto net = model::ToyModel::build(c);
            CHECK(net.parameter_count() <= 1000);
            Gen gen(seed + 400);
            const auto batch = gen.tensor({6, 4});
            const std::vector<int> labels{0, 1, 2, 0, 1, 2};
            auto f = [&](Tape& t, std::span<const Var> ps) {
                auto pass = model::forward(t, net, ps, t.leaf(batch));
                return t.softmax_cross_entropy(pass.logits, labels);
            };
            const auto report = grad_check(f, net.parameters(), 1e-5, 1e-4);
            CHECK(report.passed);
            CHECK(report.checked + report.nondifferentiable.size() == net.parameter_count());
            CHECK(report.checked > net.parameter_count() / 2);
        }
    }
}
