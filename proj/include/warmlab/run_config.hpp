// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "warmlab/metrics.hpp"
#include "warmlab/model.hpp"
#include "warmlab/optim.hpp"
#include "warmlab/schedule.hpp"

namespace warmlab::harness {

struct DataConfig {
    std::uint64_t seed = 0;
    std::int64_t num_samples = 512;
    std::int64_t batch_size = 32;
    double noise_level = 0.5;
    /// Fraction of samples held out for a validation curve; 0 disables it.
    double holdout_fraction = 0.0;

    bool operator==(const DataConfig&) const = default;
};

/// Everything that determines a training run.
struct RunConfig {
    schedule::ScheduleConfig schedule;
    optim::AdamConfig adam;
    optim::ClipConfig clip;
    model::StackConfig model;
    DataConfig data;
    std::int64_t total_steps = 500;
    std::int64_t log_every = 1;
    std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
    double label_smoothing = 0.0;
    /// Micro-batches averaged per optimizer step.
    std::int64_t grad_accumulation = 1;
    DetectorConfig detector;

    bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError naming the offending field by its JSON path.
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
/// Optional fields fall back to the RunConfig defaults; `schedule` and `model`
/// sections are required. Throws ParseError with a field path.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig parse_run_config(std::string_view text);

/// The fields a checkpoint must agree on: everything except the loop lengths
/// (total_steps, log_every, checkpoint_every) and the detector.
nlohmann::json resumable_fields(const RunConfig& config);

/// Small configuration that trains in well under a second per hundred steps:
/// L=2, K=2, d=16, 4 classes, exponential warmup over 100 steps, 500 steps.
RunConfig tiny_benchmark();

}  // namespace warmlab::harness
