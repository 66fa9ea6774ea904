// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace warmlab::harness {

/// One row of training telemetry.
struct MetricsRow {
    std::int64_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double perplexity = 0.0;
    double grad_norm_preclip = 0.0;
    double grad_norm_postclip = 0.0;
    std::int64_t wallclock_ms = 0;

    /// Equality on every column except wallclock_ms, comparing bit patterns.
    bool same_values(const MetricsRow& other) const noexcept;
};

/// exp(mean_loss).
double perplexity(double mean_loss);

inline constexpr const char* kMetricsHeader = "step,lr,loss,ppl,gnorm_preclip,gnorm_postclip,wallclock_ms";

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

/// Reads a metrics CSV. Columns are located by header name, so extra columns
/// are tolerated. Throws ParseError on an empty input, a missing column or a
/// malformed value.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Divergence detection

struct DetectorConfig {
    double spike_threshold = 100.0;
    double baseline_threshold = 25.0;
    /// Rows with step <= burn_in_steps are ignored. Unset means 10% of the
    /// last logged step.
    std::optional<std::int64_t> burn_in_steps;
    std::int64_t min_spikes = 1;

    bool operator==(const DetectorConfig&) const = default;
};

void validate(const DetectorConfig& config);

enum class RunStatus { kConverged, kDiverged, kInconclusive };

std::string_view status_name(RunStatus status);

struct SpikeEvent {
    std::int64_t step = 0;
    double grad_norm = 0.0;
    bool operator==(const SpikeEvent&) const = default;
};

struct RunVerdict {
    RunStatus status = RunStatus::kInconclusive;
    std::vector<SpikeEvent> evidence;
    double final_loss = 0.0;
    /// First step whose loss was NaN or infinite, if any.
    std::optional<std::int64_t> nonfinite_loss_step;
    std::int64_t burn_in_steps = 0;
};

/// Diverged: at least min_spikes post-burn-in rows with grad_norm_preclip above
/// spike_threshold (non-finite norms count), or any non-finite loss.
/// Converged: at least one post-burn-in row, every post-burn-in norm at most
/// baseline_threshold, and final loss below the first logged loss.
/// Anything else is inconclusive. Throws ContractError on an empty log.
RunVerdict detect_divergence(std::span<const MetricsRow> log, const DetectorConfig& config);

nlohmann::json to_json(const RunVerdict& verdict);
nlohmann::json to_json(const DetectorConfig& config);
DetectorConfig detector_config_from_json(const nlohmann::json& doc, const std::string& path_prefix = "detector.");

}  // namespace warmlab::harness
