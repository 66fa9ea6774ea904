// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "warmlab/autodiff.hpp"

namespace warmlab::optim {

using ad::Tensor;

enum class WeightDecayMode {
    kDecoupled,  // p -= lr * weight_decay * p, outside the adaptive update
    kCoupled,    // g += weight_decay * p before the moment update (L2)
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-8;
    double weight_decay = 0.001;
    WeightDecayMode decay_mode = WeightDecayMode::kDecoupled;

    bool operator==(const AdamConfig&) const = default;
};

struct ClipConfig {
    double max_norm = 10.0;
    bool operator==(const ClipConfig&) const = default;
};

/// Throws ConfigError on out-of-range fields.
void validate(const AdamConfig& config);
void validate(const ClipConfig& config);

struct AdamState {
    std::int64_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    /// Zero moments shaped like `params`.
    static AdamState for_params(std::span<const Tensor> params);

    bool operator==(const AdamState&) const = default;
};

/// Euclidean norm of all entries of all tensors. Returns +infinity when any
/// entry is non-finite.
double global_grad_norm(std::span<const Tensor> grads);

/// Norms within this relative distance above max_norm count as on the
/// boundary and are left unscaled, which makes clipping idempotent.
inline constexpr double kClipBoundarySlack = 1e-12;

struct ClipStats {
    double pre_clip_norm = 0.0;
    double post_clip_norm = 0.0;
    bool scaled = false;
};

/// Scales `grads` in place so their global norm is at most max_norm.
/// Throws NumericError when the norm is not finite.
ClipStats clip_global_norm_inplace(std::span<Tensor> grads, const ClipConfig& clip);

struct ClippedGradients {
    std::vector<Tensor> grads;
    double pre_clip_norm = 0.0;
    double post_clip_norm = 0.0;
};

ClippedGradients clip_global_norm(std::span<const Tensor> grads, const ClipConfig& clip);

/// One Adam update with bias correction. `grads` are the post-clip gradients.
/// Throws ContractError on shape or count mismatches.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config, double lr);

nlohmann::json to_json(const AdamState& state);
AdamState adam_state_from_json(const nlohmann::json& doc);

}  // namespace warmlab::optim
