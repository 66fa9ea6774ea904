// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace warmlab::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Rank 1 or 2 in practice; scalars are [1].
class Tensor {
   public:
    Tensor() = default;
    /// Throws ShapeError if a dimension is zero or the sizes disagree.
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rank() const noexcept { return shape_.size(); }
    /// Leading extent for rank 2, 1 for rank 1.
    std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
    /// Trailing extent.
    std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double item() const;
    bool all_finite() const noexcept;
    /// Frobenius norm.
    double norm() const noexcept;

    bool operator==(const Tensor&) const = default;

   private:
    Shape shape_;
    std::vector<double> data_;
};

/// Handle to a node recorded on a Tape.
struct Var {
    std::size_t id = 0;
};

/// Reverse-mode differentiation record. Nodes are appended in evaluation
/// order, so ids are already a topological order. One thread per tape.
class Tape {
   public:
    /// Differentiable input (parameter or data).
    Var leaf(Tensor value);

    const Tensor& value(Var v) const;
    /// Adjoint of `v`; valid after backward().
    const Tensor& grad(Var v) const;
    const std::vector<std::size_t>& inputs(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }
    bool has_backward() const noexcept { return has_backward_; }

    /// True if any recorded value holds a NaN or infinity.
    bool has_nonfinite() const noexcept;

    /// Sign (-1/0/+1) of every relu input seen so far, in evaluation order.
    /// Two evaluations with differing signatures took different branches.
    const std::vector<std::int8_t>& kink_signature() const noexcept { return kinks_; }

    // Primitives. Each throws ShapeError on incompatible shapes.

    /// Elementwise a + b; b may also be a [d] vector added to every row of an [n x d] a.
    Var add(Var a, Var b);
    /// x + fx for equally shaped tensors.
    Var residual_add(Var x, Var fx);
    Var mul(Var a, Var b);
    Var matmul(Var a, Var b);
    Var relu(Var a);
    /// Normalizes each row of an [n x d] tensor, then applies gain and bias.
    Var layer_norm(Var x, Var gain, Var bias);
    /// Sum of all entries, as a [1] tensor.
    Var sum(Var a);
    /// Mean over rows of -sum_c q_c log softmax(logits)_c with
    /// q = (1 - smoothing) * onehot(label) + smoothing / C.
    /// Throws IndexError for labels outside [0, C).
    Var softmax_cross_entropy(Var logits, std::span<const int> labels, double smoothing = 0.0);

    /// Populates adjoints for every node. Throws ContractError if `loss` is not
    /// a single-element tensor.
    void backward(Var loss);

    static constexpr double kLayerNormEpsilon = 1e-5;

   private:
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };

    Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);
    const Node& node(Var v) const;
    Tensor& grad_mut(std::size_t id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    std::vector<std::int8_t> kinks_;
    bool has_backward_ = false;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

/// Builds a scalar function of `x` on the given tape.
using ScalarFn = std::function<Var(Tape&, Var x)>;

struct GradCheckReport {
    std::vector<double> analytic;
    std::vector<double> numeric;
    /// Coordinates where a relu changed branch inside [x - h, x + h]; they are
    /// excluded from the error statistics.
    std::vector<std::size_t> nondifferentiable;
    std::size_t checked = 0;
    double max_abs_error = 0.0;
    /// |analytic - numeric| / max(|analytic|, |numeric|, kRelativeFloor).
    double max_rel_error = 0.0;
    bool passed = false;

    static constexpr double kRelativeFloor = 1e-6;
};

/// Compares reverse-mode gradients of `f` at `point` against central
/// differences with step `h`. `passed` is max_rel_error < tol.
/// Throws NumericError with the coordinate index on non-finite evaluations.
GradCheckReport grad_check(const ScalarFn& f, const Tensor& point, double h, double tol);

using MultiScalarFn = std::function<Var(Tape&, std::span<const Var> xs)>;

/// As above over several leaves; coordinates are numbered through the points
/// in order, row-major within each.
GradCheckReport grad_check(const MultiScalarFn& f, std::span<const Tensor> points, double h, double tol);

}  // namespace warmlab::ad
