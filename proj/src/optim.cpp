// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "warmlab/error.hpp"
#include "warmlab/tensor_io.hpp"

namespace warmlab::optim {

void validate(const AdamConfig& c) {
    if (!(c.beta1 > 0.0 && c.beta1 < 1.0)) throw ConfigError("beta1", "must lie in (0, 1)");
    if (!(c.beta2 > 0.0 && c.beta2 < 1.0)) throw ConfigError("beta2", "must lie in (0, 1)");
    if (!(c.epsilon > 0.0 && std::isfinite(c.epsilon))) throw ConfigError("epsilon", "must be > 0");
    if (!(c.weight_decay >= 0.0 && std::isfinite(c.weight_decay))) throw ConfigError("weight_decay", "must be >= 0");
}

void validate(const ClipConfig& c) {
    if (!(c.max_norm > 0.0 && std::isfinite(c.max_norm))) throw ConfigError("max_norm", "must be > 0");
}

AdamState AdamState::for_params(std::span<const Tensor> params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.push_back(Tensor::zeros(p.shape()));
        s.v.push_back(Tensor::zeros(p.shape()));
    }
    return s;
}

double global_grad_norm(std::span<const Tensor> grads) {
    double sum_sq = 0.0;
    double max_abs = 0.0;
    for (const auto& g : grads) {
        for (double x : g.data()) {
            if (!std::isfinite(x)) return HUGE_VAL;
            sum_sq += x * x;
            max_abs = std::max(max_abs, std::abs(x));
        }
    }
    if (std::isfinite(sum_sq)) return std::sqrt(sum_sq);

    // Squares overflowed although every entry is finite: rescale.
    double scaled = 0.0;
    for (const auto& g : grads)
        for (double x : g.data()) {
            const double r = x / max_abs;
            scaled += r * r;
        }
    return max_abs * std::sqrt(scaled);
}

ClipStats clip_global_norm_inplace(std::span<Tensor> grads, const ClipConfig& clip) {
    validate(clip);
    ClipStats stats;
    stats.pre_clip_norm = global_grad_norm(grads);
    if (!std::isfinite(stats.pre_clip_norm)) {
        throw NumericError("gradient norm is not finite");
    }
    if (stats.pre_clip_norm <= clip.max_norm * (1.0 + kClipBoundarySlack)) {
        stats.post_clip_norm = stats.pre_clip_norm;
        return stats;
    }
    const double scale = clip.max_norm / stats.pre_clip_norm;
    for (auto& g : grads)
        for (double& x : g.data()) x *= scale;
    stats.scaled = true;
    stats.post_clip_norm = global_grad_norm(grads);
    return stats;
}

ClippedGradients clip_global_norm(std::span<const Tensor> grads, const ClipConfig& clip) {
    ClippedGradients out{std::vector<Tensor>(grads.begin(), grads.end())};
    const auto stats = clip_global_norm_inplace(out.grads, clip);
    out.pre_clip_norm = stats.pre_clip_norm;
    out.post_clip_norm = stats.post_clip_norm;
    return out;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config, double lr) {
    validate(config);
    if (!(lr >= 0.0)) throw ContractError("adam_step: lr must be >= 0");
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        throw ContractError("adam_step: params, grads and moments must have the same count");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != grads[i].shape() || params[i].shape() != state.m[i].shape() ||
            params[i].shape() != state.v[i].shape()) {
            throw ContractError("adam_step: shape mismatch at parameter " + std::to_string(i) + ": " +
                                ad::shape_string(params[i].shape()) + " vs " + ad::shape_string(grads[i].shape()));
        }
    }

    state.t += 1;
    const double b1 = config.beta1, b2 = config.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    const bool coupled = config.decay_mode == WeightDecayMode::kCoupled;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto g = grads[i].data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double grad = coupled ? g[j] + config.weight_decay * p[j] : g[j];
            m[j] = b1 * m[j] + (1.0 - b1) * grad;
            v[j] = b2 * v[j] + (1.0 - b2) * grad * grad;
            const double m_hat = m[j] / bias1;
            const double v_hat = v[j] / bias2;
            const double update = lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
            if (coupled) {
                p[j] -= update;
            } else {
                p[j] = p[j] - update - lr * config.weight_decay * p[j];
            }
        }
    }
}

nlohmann::json to_json(const AdamState& state) {
    nlohmann::json m = nlohmann::json::array();
    nlohmann::json v = nlohmann::json::array();
    for (const auto& t : state.m) m.push_back(io::tensor_to_json(t));
    for (const auto& t : state.v) v.push_back(io::tensor_to_json(t));
    return {{"t", state.t}, {"m", m}, {"v", v}};
}

AdamState adam_state_from_json(const nlohmann::json& doc) {
    AdamState s;
    try {
        s.t = doc.at("t").get<std::int64_t>();
        for (const auto& t : doc.at("m")) s.m.push_back(io::tensor_from_json(t, "adam.m"));
        for (const auto& t : doc.at("v")) s.v.push_back(io::tensor_from_json(t, "adam.v"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("adam", e.what());
    }
    if (s.m.size() != s.v.size()) throw ParseError("adam", "moment lists differ in length");
    return s;
}

}  // namespace warmlab::optim
