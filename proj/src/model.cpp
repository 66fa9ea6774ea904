// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/model.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "warmlab/error.hpp"
#include "warmlab/rng.hpp"
#include "warmlab/schedule.hpp"

namespace warmlab::model {

void validate(const StackConfig& c) {
    if (c.depth < 1) throw ConfigError("model.depth", "must be >= 1");
    if (c.subcomponents_per_block < 1) throw ConfigError("model.subcomponents_per_block", "must be >= 1");
    if (c.width < 1) throw ConfigError("model.width", "must be >= 1");
    if (!(c.init_scale > 0.0 && std::isfinite(c.init_scale))) throw ConfigError("model.init_scale", "must be > 0");
    if (c.num_classes < 1) throw ConfigError("model.num_classes", "must be >= 1");
    if (c.input_dim < 1) throw ConfigError("model.input_dim", "must be >= 1");
}

std::size_t parameter_count(const StackConfig& c) {
    const auto d = static_cast<std::size_t>(c.width);
    const auto lk = static_cast<std::size_t>(c.depth * c.subcomponents_per_block);
    const auto classes = static_cast<std::size_t>(c.num_classes);
    std::size_t n = static_cast<std::size_t>(c.input_dim) * d + lk * (d * d + d) + d * classes + classes;
    if (c.normalize_subcomponents) n += 2 * lk * d;
    return n;
}

ToyModel ToyModel::build(const StackConfig& config) {
    validate(config);
    const auto d = static_cast<std::size_t>(config.width);
    const auto in = static_cast<std::size_t>(config.input_dim);
    const auto classes = static_cast<std::size_t>(config.num_classes);

    std::mt19937_64 gen(rng::mix(config.seed));
    auto uniform = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
        const double bound = config.init_scale / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor t = Tensor::zeros({rows, cols});
        for (double& x : t.data()) x = dist(gen);
        return t;
    };

    std::vector<Tensor> params;
    params.push_back(uniform(in, d, in));
    for (std::int64_t b = 0; b < config.depth; ++b) {
        for (std::int64_t k = 0; k < config.subcomponents_per_block; ++k) {
            params.push_back(uniform(d, d, d));
            params.push_back(Tensor::zeros({d}));
            if (config.normalize_subcomponents) {
                params.push_back(Tensor::filled({d}, 1.0));
                params.push_back(Tensor::zeros({d}));
            }
        }
    }
    params.push_back(uniform(d, classes, d));
    params.push_back(Tensor::zeros({classes}));
    return ToyModel(config, std::move(params));
}

ToyModel::ToyModel(StackConfig config, std::vector<Tensor> params)
    : config_(std::move(config)), params_(std::move(params)) {
    validate(config_);
    const auto d = static_cast<std::size_t>(config_.width);
    const auto in = static_cast<std::size_t>(config_.input_dim);
    const auto classes = static_cast<std::size_t>(config_.num_classes);
    const auto expected_count =
        3 + static_cast<std::size_t>(config_.depth * config_.subcomponents_per_block) * params_per_subcomponent();
    if (params_.size() != expected_count) {
        throw ShapeError("model expects " + std::to_string(expected_count) + " parameter tensors, got " +
                         std::to_string(params_.size()));
    }
    auto expect = [&](std::size_t i, const ad::Shape& shape) {
        if (params_[i].shape() != shape) {
            throw ShapeError("parameter " + std::to_string(i) + " has shape " + ad::shape_string(params_[i].shape()) +
                             ", expected " + ad::shape_string(shape));
        }
    };
    expect(kInputProjection, {in, d});
    for (std::size_t b = 0; b < static_cast<std::size_t>(config_.depth); ++b) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(config_.subcomponents_per_block); ++k) {
            const auto i = subcomponent_index(b, k);
            expect(i, {d, d});
            expect(i + 1, {d});
            if (config_.normalize_subcomponents) {
                expect(i + 2, {d});
                expect(i + 3, {d});
            }
        }
    }
    expect(head_index(), {d, classes});
    expect(head_index() + 1, {classes});
}

std::size_t ToyModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

std::size_t ToyModel::subcomponent_index(std::size_t block, std::size_t k) const noexcept {
    return 1 + (block * static_cast<std::size_t>(config_.subcomponents_per_block) + k) * params_per_subcomponent();
}

ForwardPass forward(ad::Tape& tape, const ToyModel& model, const Tensor& batch) {
    const auto& config = model.config();
    if (batch.rank() != 2 || batch.cols() != static_cast<std::size_t>(config.input_dim)) {
        throw ShapeError("forward: batch " + ad::shape_string(batch.shape()) + " vs input_dim " +
                         std::to_string(config.input_dim));
    }
    std::vector<Var> params;
    for (const auto& p : model.parameters()) params.push_back(tape.leaf(p));
    return forward(tape, model, params, tape.leaf(batch));
}

ForwardPass forward(ad::Tape& tape, const ToyModel& model, std::span<const Var> params, Var input) {
    const auto& config = model.config();
    if (params.size() != model.parameters().size()) {
        throw ContractError("forward: expected " + std::to_string(model.parameters().size()) +
                            " parameter variables, got " + std::to_string(params.size()));
    }
    ForwardPass pass;
    pass.params.assign(params.begin(), params.end());
    pass.input = input;

    Var h = tape.matmul(pass.input, pass.params[ToyModel::kInputProjection]);
    for (std::size_t b = 0; b < static_cast<std::size_t>(config.depth); ++b) {
        for (std::size_t k = 0; k < static_cast<std::size_t>(config.subcomponents_per_block); ++k) {
            const auto i = model.subcomponent_index(b, k);
            Var u = h;
            if (config.normalize_subcomponents) {
                u = tape.layer_norm(u, pass.params[i + 2], pass.params[i + 3]);
            }
            Var f = tape.add(tape.matmul(tape.relu(u), pass.params[i]), pass.params[i + 1]);
            h = tape.residual_add(h, f);
        }
    }
    pass.hidden = h;
    const auto head = model.head_index();
    pass.logits = tape.add(tape.matmul(h, pass.params[head]), pass.params[head + 1]);
    pass.overflow = !tape.value(pass.hidden).all_finite() || !tape.value(pass.logits).all_finite();
    return pass;
}

LossAndGrads loss_and_grads(const ToyModel& model, const Tensor& batch, std::span<const int> labels,
                            double label_smoothing) {
    ad::Tape tape;
    auto pass = forward(tape, model, batch);
    Var loss = tape.softmax_cross_entropy(pass.logits, labels, label_smoothing);
    tape.backward(loss);

    LossAndGrads out;
    out.loss = tape.value(loss).item();
    out.overflow = pass.overflow;
    out.grads.reserve(pass.params.size());
    for (auto v : pass.params) out.grads.push_back(tape.grad(v));
    return out;
}

std::vector<DepthGainRow> depth_gain_probe(const StackConfig& base, std::span<const std::int64_t> depths,
                                           int trials) {
    validate(base);
    if (depths.empty()) throw ContractError("depth_gain_probe: depth list is empty");
    if (trials < 1) throw ContractError("depth_gain_probe: trials must be >= 1");

    constexpr std::size_t kBatchRows = 32;
    const auto in = static_cast<std::size_t>(base.input_dim);
    Tensor batch = Tensor::zeros({kBatchRows, in});
    std::vector<int> labels(kBatchRows);
    {
        std::mt19937_64 gen(rng::mix(base.seed ^ 0x70726f6265ULL));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& x : batch.data()) x = normal(gen);
        for (std::size_t r = 0; r < kBatchRows; ++r) labels[r] = static_cast<int>(r % base.num_classes);
    }

    std::vector<DepthGainRow> rows;
    for (auto depth : depths) {
        DepthGainRow row{depth, 0.0, 0.0};
        for (int trial = 0; trial < trials; ++trial) {
            StackConfig c = base;
            c.depth = depth;
            c.seed = rng::derive(base.seed, static_cast<std::uint64_t>(depth), static_cast<std::uint64_t>(trial));
            const auto model = ToyModel::build(c);

            ad::Tape tape;
            auto pass = forward(tape, model, batch);
            Var loss = tape.softmax_cross_entropy(pass.logits, labels);
            tape.backward(loss);

            const Tensor& h = tape.value(pass.hidden);
            double act = 0.0;
            for (std::size_t r = 0; r < h.rows(); ++r) {
                double s = 0.0;
                for (std::size_t c2 = 0; c2 < h.cols(); ++c2) s += h.at(r, c2) * h.at(r, c2);
                act += std::sqrt(s);
            }
            row.act_norm += act / static_cast<double>(h.rows());
            row.grad_norm += tape.grad(pass.params[ToyModel::kInputProjection]).norm();
        }
        row.act_norm /= trials;
        row.grad_norm /= trials;
        rows.push_back(row);
    }
    return rows;
}

void write_probe_csv(std::ostream& out, std::span<const DepthGainRow> rows) {
    out << "depth,act_norm,grad_norm\n";
    for (const auto& r : rows) {
        out << r.depth << ',' << schedule::format_real(r.act_norm) << ',' << schedule::format_real(r.grad_norm)
            << '\n';
    }
}

nlohmann::json to_json(const StackConfig& c) {
    return {{"depth", c.depth},
            {"subcomponents_per_block", c.subcomponents_per_block},
            {"width", c.width},
            {"normalize_subcomponents", c.normalize_subcomponents},
            {"init_scale", c.init_scale},
            {"seed", c.seed},
            {"num_classes", c.num_classes},
            {"input_dim", c.input_dim}};
}

StackConfig stack_config_from_json(const nlohmann::json& doc, const std::string& p) {
    if (!doc.is_object()) throw ParseError(p.empty() ? "model" : p.substr(0, p.size() - 1), "expected an object");
    StackConfig c;
    auto get_int = [&](const char* key, std::int64_t& dst) {
        if (auto it = doc.find(key); it != doc.end()) {
            if (!it->is_number_integer()) throw ParseError(p + key, "expected an integer");
            dst = it->get<std::int64_t>();
        }
    };
    get_int("depth", c.depth);
    get_int("subcomponents_per_block", c.subcomponents_per_block);
    get_int("width", c.width);
    get_int("num_classes", c.num_classes);
    get_int("input_dim", c.input_dim);
    if (auto it = doc.find("normalize_subcomponents"); it != doc.end()) {
        if (!it->is_boolean()) throw ParseError(p + "normalize_subcomponents", "expected a boolean");
        c.normalize_subcomponents = it->get<bool>();
    }
    if (auto it = doc.find("init_scale"); it != doc.end()) {
        if (!it->is_number()) throw ParseError(p + "init_scale", "expected a number");
        c.init_scale = it->get<double>();
    }
    if (auto it = doc.find("seed"); it != doc.end()) {
        if (!it->is_number_unsigned()) throw ParseError(p + "seed", "expected a non-negative integer");
        c.seed = it->get<std::uint64_t>();
    }
    try {
        validate(c);
    } catch (const ParseError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ParseError(e.field(), e.detail());
    }
    return c;
}

}  // namespace warmlab::model
