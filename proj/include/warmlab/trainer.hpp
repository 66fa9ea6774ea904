// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "warmlab/metrics.hpp"
#include "warmlab/optim.hpp"
#include "warmlab/run_config.hpp"

namespace warmlab::harness {

/// All mutable state of a run. The schedule needs none: it is a pure function
/// of `step`.
struct TrainState {
    std::int64_t step = 0;  // optimizer steps completed
    std::vector<ad::Tensor> params;
    optim::AdamState adam;
    std::uint64_t data_cursor = 0;  // training samples consumed

    bool operator==(const TrainState&) const = default;
};

/// Freshly initialized model and optimizer for `config`.
TrainState initial_state(const RunConfig& config);

struct ValidationRow {
    std::int64_t step = 0;
    double loss = 0.0;
    double perplexity = 0.0;
};

struct TrainOptions {
    /// Called after every checkpoint_every-th step.
    std::function<void(const TrainState&)> on_checkpoint;
    /// Called for every emitted metrics row, in order.
    std::function<void(const MetricsRow&)> on_row;
    /// Rows logged before the resume point. Only the detector sees them, so a
    /// resumed run is judged on its whole history; they are not re-emitted.
    std::vector<MetricsRow> prior_log;
};

struct TrainResult {
    std::vector<MetricsRow> log;
    std::vector<ValidationRow> validation;
    RunVerdict verdict;
    TrainState final_state;
    /// Step at which the run stopped on a non-finite loss or gradient norm.
    std::optional<std::int64_t> stopped_at;
};

/// Runs optimizer steps resume_from.step + 1 .. total_steps (or from step 1).
/// Each step: forward, loss, backward, clip, Adam with lr_at(schedule, step).
/// A row is logged every log_every steps and at the last step; a non-finite
/// loss or gradient norm logs its row and ends the run as diverged.
TrainResult train(const RunConfig& config, const TrainOptions& options = {},
                  const TrainState* resume_from = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints: a versioned JSON container.

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const RunConfig& config, const TrainState& state);
/// Throws LoadError naming the first field where the stored configuration
/// disagrees with `config`, or the version on a version mismatch.
TrainState resume(const nlohmann::json& checkpoint, const RunConfig& config);

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path, const RunConfig& config);

/// Hex FNV-1a of the resumable configuration fields.
std::string config_hash(const RunConfig& config);

}  // namespace warmlab::harness
