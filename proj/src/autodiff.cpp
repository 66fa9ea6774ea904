// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "warmlab/error.hpp"

namespace warmlab::ad {

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor shape " + shape_string(shape_) + " has a zero dimension");
    }
    if (numel(shape_) != data_.size()) {
        throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " entries");
    }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

double Tensor::item() const {
    if (data_.size() != 1) throw ContractError("item() on a tensor of shape " + shape_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Tensor::norm() const noexcept {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------

Var Tape::push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    nodes_.push_back({std::move(value), Tensor{}, std::move(inputs), std::move(backward)});
    return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) throw ContractError("variable id " + std::to_string(v.id) + " not on this tape");
    return nodes_[v.id];
}

Var Tape::leaf(Tensor value) { return push(std::move(value), {}, nullptr); }

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
    const auto& n = node(v);
    if (!has_backward_) throw ContractError("grad() requested before backward()");
    return n.grad;
}

const std::vector<std::size_t>& Tape::inputs(Var v) const { return node(v).inputs; }

bool Tape::has_nonfinite() const noexcept {
    return std::any_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return !n.value.all_finite(); });
}

Var Tape::add(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.shape() == y.shape()) {
        Tensor out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
        return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Tensor& g) {
            auto& ga = t.grad_mut(a.id);
            auto& gb = t.grad_mut(b.id);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        });
    }
    // Row-bias broadcast: [n x d] + [d].
    if (x.rank() == 2 && y.rank() == 1 && y.cols() == x.cols()) {
        Tensor out = x;
        const auto n = x.rows(), d = x.cols();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) out.at(r, c) += y[c];
        return push(std::move(out), {a.id, b.id}, [a, b, n, d](Tape& t, const Tensor& g) {
            auto& ga = t.grad_mut(a.id);
            auto& gb = t.grad_mut(b.id);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < d; ++c) {
                    ga.at(r, c) += g.at(r, c);
                    gb[c] += g.at(r, c);
                }
            }
        });
    }
    shape_mismatch("add", x.shape(), y.shape());
}

Var Tape::residual_add(Var x, Var fx) {
    if (value(x).shape() != value(fx).shape()) shape_mismatch("residual_add", value(x).shape(), value(fx).shape());
    return add(x, fx);
}

Var Tape::mul(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.shape() != y.shape()) shape_mismatch("mul", x.shape(), y.shape());
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
    return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, const Tensor& g) {
        const Tensor& xa = t.nodes_[a.id].value;
        const Tensor& xb = t.nodes_[b.id].value;
        auto& ga = t.grad_mut(a.id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * xb[i];
        auto& gb = t.grad_mut(b.id);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xa[i];
    });
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& x = value(a);
    const Tensor& y = value(b);
    if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows()) shape_mismatch("matmul", x.shape(), y.shape());
    const auto m = x.rows(), k = x.cols(), n = y.cols();
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = x.at(i, p);
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += xv * y.at(p, j);
        }
    return push(std::move(out), {a.id, b.id}, [a, b, m, k, n](Tape& t, const Tensor& g) {
        const Tensor& xa = t.nodes_[a.id].value;
        const Tensor& xb = t.nodes_[b.id].value;
        Tensor da = Tensor::zeros({m, k});
        Tensor db = Tensor::zeros({k, n});
        // dA = G B^T, dB = A^T G
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += g.at(i, j) * xb.at(p, j);
                da.at(i, p) = s;
            }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double xv = xa.at(i, p);
                for (std::size_t j = 0; j < n; ++j) db.at(p, j) += xv * g.at(i, j);
            }
        auto& ga = t.grad_mut(a.id);
        for (std::size_t i = 0; i < da.size(); ++i) ga[i] += da[i];
        auto& gb = t.grad_mut(b.id);
        for (std::size_t i = 0; i < db.size(); ++i) gb[i] += db[i];
    });
}

Var Tape::relu(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out[i];
        kinks_.push_back(static_cast<std::int8_t>((v > 0) - (v < 0)));
        if (!(v > 0)) out[i] = std::isnan(v) ? v : 0.0;
    }
    return push(std::move(out), {a.id}, [a](Tape& t, const Tensor& g) {
        const Tensor& x = t.nodes_[a.id].value;
        auto& ga = t.grad_mut(a.id);
        // Subgradient 0 at exactly 0.
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0) ga[i] += g[i];
    });
}

Var Tape::layer_norm(Var x, Var gain, Var bias) {
    const Tensor& xv = value(x);
    const Tensor& gv = value(gain);
    const Tensor& bv = value(bias);
    if (xv.rank() != 2) shape_mismatch("layer_norm", xv.shape(), gv.shape());
    const auto n = xv.rows(), d = xv.cols();
    if (gv.shape() != Shape{d}) shape_mismatch("layer_norm", xv.shape(), gv.shape());
    if (bv.shape() != Shape{d}) shape_mismatch("layer_norm", xv.shape(), bv.shape());

    auto xhat = std::make_shared<Tensor>(Tensor::zeros({n, d}));
    auto inv_std = std::make_shared<std::vector<double>>(n);
    Tensor out = Tensor::zeros({n, d});
    for (std::size_t r = 0; r < n; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += xv.at(r, c);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double dv = xv.at(r, c) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        (*inv_std)[r] = inv;
        for (std::size_t c = 0; c < d; ++c) {
            const double h = (xv.at(r, c) - mean) * inv;
            xhat->at(r, c) = h;
            out.at(r, c) = h * gv[c] + bv[c];
        }
    }
    return push(std::move(out), {x.id, gain.id, bias.id},
                [x, gain, bias, n, d, xhat, inv_std](Tape& t, const Tensor& g) {
                    const Tensor& gv = t.nodes_[gain.id].value;
                    auto& gx = t.grad_mut(x.id);
                    std::vector<double> dxhat(d);
                    for (std::size_t r = 0; r < n; ++r) {
                        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                        for (std::size_t c = 0; c < d; ++c) {
                            dxhat[c] = g.at(r, c) * gv[c];
                            mean_dxhat += dxhat[c];
                            mean_dxhat_xhat += dxhat[c] * xhat->at(r, c);
                        }
                        mean_dxhat /= static_cast<double>(d);
                        mean_dxhat_xhat /= static_cast<double>(d);
                        for (std::size_t c = 0; c < d; ++c) {
                            gx.at(r, c) +=
                                (*inv_std)[r] * (dxhat[c] - mean_dxhat - xhat->at(r, c) * mean_dxhat_xhat);
                        }
                    }
                    auto& gg = t.grad_mut(gain.id);
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < d; ++c) gg[c] += g.at(r, c) * xhat->at(r, c);
                    auto& gb = t.grad_mut(bias.id);
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < d; ++c) gb[c] += g.at(r, c);
                });
}

Var Tape::sum(Var a) {
    double s = 0.0;
    for (double v : value(a).data()) s += v;
    return push(Tensor::scalar(s), {a.id}, [a](Tape& t, const Tensor& g) {
        auto& ga = t.grad_mut(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
    });
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels, double smoothing) {
    const Tensor& z = value(logits);
    if (z.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [n x C], got " + shape_string(z.shape()));
    const auto n = z.rows(), classes = z.cols();
    if (labels.size() != n) {
        throw ShapeError("softmax_cross_entropy: logits " + shape_string(z.shape()) + " vs labels [" +
                         std::to_string(labels.size()) + "]");
    }
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ContractError("label smoothing must lie in [0, 1)");
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
            throw IndexError("label " + std::to_string(labels[r]) + " at row " + std::to_string(r) +
                             " outside [0, " + std::to_string(classes) + ")");
        }
    }

    const double off = smoothing / static_cast<double>(classes);
    const double on = 1.0 - smoothing + off;
    auto probs = std::make_shared<Tensor>(Tensor::zeros({n, classes}));
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double m = z.at(r, 0);
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, z.at(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z.at(r, c) - m);
        const double log_denom = std::log(denom);
        double row_loss = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double log_p = z.at(r, c) - m - log_denom;
            probs->at(r, c) = std::exp(log_p);
            const double q = static_cast<std::size_t>(labels[r]) == c ? on : off;
            if (q != 0.0) row_loss -= q * log_p;
        }
        total += row_loss;
    }
    std::vector<int> label_copy(labels.begin(), labels.end());
    return push(Tensor::scalar(total / static_cast<double>(n)), {logits.id},
                [logits, probs, label_copy = std::move(label_copy), n, classes, on, off](Tape& t, const Tensor& g) {
                    auto& gz = t.grad_mut(logits.id);
                    const double scale = g[0] / static_cast<double>(n);
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < classes; ++c) {
                            const double q = static_cast<std::size_t>(label_copy[r]) == c ? on : off;
                            gz.at(r, c) += scale * (probs->at(r, c) - q);
                        }
                });
}

void Tape::backward(Var loss) {
    const Tensor& lv = value(loss);
    if (lv.size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " + shape_string(lv.shape()));
    }
    for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape());
    nodes_[loss.id].grad[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        auto& n = nodes_[id];
        if (n.backward) n.backward(*this, n.grad);
    }
    has_backward_ = true;
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const ScalarFn& f, const Tensor& point, double h, double tol) {
    const MultiScalarFn wrapped = [&](Tape& tape, std::span<const Var> xs) { return f(tape, xs[0]); };
    return grad_check(wrapped, std::span<const Tensor>(&point, 1), h, tol);
}

GradCheckReport grad_check(const MultiScalarFn& f, std::span<const Tensor> points, double h, double tol) {
    if (!(h > 0.0)) throw ContractError("grad_check: h must be > 0");

    auto record = [&](Tape& tape, std::span<const Tensor> at) {
        std::vector<Var> xs;
        xs.reserve(at.size());
        for (const auto& p : at) xs.push_back(tape.leaf(p));
        return std::make_pair(xs, f(tape, xs));
    };

    GradCheckReport report;
    {
        Tape tape;
        const auto [xs, y] = record(tape, points);
        if (!tape.value(y).all_finite()) throw NumericError("grad_check: non-finite value at the base point", 0);
        tape.backward(y);
        for (auto x : xs) {
            const auto g = tape.grad(x).data();
            report.analytic.insert(report.analytic.end(), g.begin(), g.end());
        }
    }

    report.numeric.assign(report.analytic.size(), 0.0);
    std::vector<Tensor> shifted(points.begin(), points.end());
    std::size_t j = 0;
    for (std::size_t t = 0; t < shifted.size(); ++t) {
        for (std::size_t k = 0; k < shifted[t].size(); ++k, ++j) {
            const double base = shifted[t][k];
            auto eval = [&](double delta) {
                shifted[t][k] = base + delta;
                Tape tape;
                const auto y = record(tape, shifted).second;
                shifted[t][k] = base;
                const double v = tape.value(y).item();
                if (!std::isfinite(v)) {
                    throw NumericError("grad_check: non-finite value at coordinate " + std::to_string(j), j);
                }
                return std::make_pair(v, tape.kink_signature());
            };
            const auto [fp, kp] = eval(h);
            const auto [fm, km] = eval(-h);
            report.numeric[j] = (fp - fm) / (2.0 * h);
            if (kp != km) {
                report.nondifferentiable.push_back(j);
                continue;
            }
            const double a = report.analytic[j];
            const double nmr = report.numeric[j];
            const double abs_err = std::abs(a - nmr);
            const double denom = std::max({std::abs(a), std::abs(nmr), GradCheckReport::kRelativeFloor});
            report.max_abs_error = std::max(report.max_abs_error, abs_err);
            report.max_rel_error = std::max(report.max_rel_error, abs_err / denom);
            ++report.checked;
        }
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

}  // namespace warmlab::ad
