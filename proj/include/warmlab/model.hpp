// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"
#include "warmlab/autodiff.hpp"

namespace warmlab::model {

using ad::Tensor;
using ad::Var;

/// A depth-L stack of blocks, each holding K residual subcomponents
/// x <- x + W * relu(norm?(x)) + b.
struct StackConfig {
    std::int64_t depth = 2;
    std::int64_t subcomponents_per_block = 2;
    std::int64_t width = 16;
    bool normalize_subcomponents = false;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
    std::int64_t num_classes = 4;
    std::int64_t input_dim = 8;

    bool operator==(const StackConfig&) const = default;
};

void validate(const StackConfig& config);

/// input_dim*d + L*K*(d^2 + d) [+ 2*L*K*d] + d*C + C
std::size_t parameter_count(const StackConfig& config);

/// Parameters stored flat, in forward order:
///   input projection [input_dim x d]
///   per block, per subcomponent: weight [d x d], bias [d], then gain [d] and
///     shift [d] when normalized
///   head weight [d x C], head bias [C]
class ToyModel {
   public:
    /// Deterministic in config.seed. Weights are uniform in
    /// [-init_scale/sqrt(fan_in), +init_scale/sqrt(fan_in)], biases and norm
    /// shifts zero, norm gains one.
    static ToyModel build(const StackConfig& config);

    /// Wraps existing parameters; throws ShapeError if they do not match `config`.
    ToyModel(StackConfig config, std::vector<Tensor> params);

    const StackConfig& config() const noexcept { return config_; }
    std::vector<Tensor>& parameters() noexcept { return params_; }
    const std::vector<Tensor>& parameters() const noexcept { return params_; }
    std::size_t parameter_count() const noexcept;

    static constexpr std::size_t kInputProjection = 0;
    /// Index of subcomponent (block, k)'s weight; bias follows it, then the
    /// norm gain and shift if present.
    std::size_t subcomponent_index(std::size_t block, std::size_t k) const noexcept;
    std::size_t head_index() const noexcept { return params_.size() - 2; }

   private:
    std::size_t params_per_subcomponent() const noexcept { return config_.normalize_subcomponents ? 4 : 2; }

    StackConfig config_;
    std::vector<Tensor> params_;
};

/// Handles into a tape for one forward evaluation.
struct ForwardPass {
    std::vector<Var> params;
    Var input;
    Var hidden;  // output of the last block
    Var logits;
    /// Some activation or logit went non-finite. Not an error: it is recorded
    /// as divergence evidence by the caller.
    bool overflow = false;
};

/// Records the forward computation of `batch` ([n x input_dim]) on `tape`.
/// Throws ShapeError if the batch width differs from input_dim.
ForwardPass forward(ad::Tape& tape, const ToyModel& model, const Tensor& batch);

/// Same computation on parameters already recorded on `tape`, in the order
/// of ToyModel::parameters(). Used to differentiate with respect to them
/// from outside, e.g. for finite-difference checks.
ForwardPass forward(ad::Tape& tape, const ToyModel& model, std::span<const Var> params, Var input);

struct LossAndGrads {
    double loss = 0.0;
    std::vector<Tensor> grads;
    bool overflow = false;
};

/// Forward, softmax cross-entropy against `labels`, and backward.
LossAndGrads loss_and_grads(const ToyModel& model, const Tensor& batch, std::span<const int> labels,
                            double label_smoothing = 0.0);

struct DepthGainRow {
    std::int64_t depth = 0;
    double act_norm = 0.0;   // mean per-sample L2 norm of the final hidden state
    double grad_norm = 0.0;  // mean Frobenius norm of the input-projection gradient
};

/// For each depth, builds `trials` models with seeds derived from
/// (base.seed, depth, trial), runs forward and backward on a fixed synthetic
/// batch drawn from base.seed, and averages the norms.
std::vector<DepthGainRow> depth_gain_probe(const StackConfig& base, std::span<const std::int64_t> depths,
                                           int trials);

/// CSV `depth,act_norm,grad_norm`.
void write_probe_csv(std::ostream& out, std::span<const DepthGainRow> rows);

nlohmann::json to_json(const StackConfig& config);
StackConfig stack_config_from_json(const nlohmann::json& doc, const std::string& path_prefix = "model.");

}  // namespace warmlab::model
