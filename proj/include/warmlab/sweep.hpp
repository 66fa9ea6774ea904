// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "warmlab/run_config.hpp"
#include "warmlab/trainer.hpp"

namespace warmlab::sweep {

struct Variant {
    std::string name;
    schedule::ScheduleConfig schedule;
};

/// A base run plus schedule substitutions. Every variant shares the base
/// model and data seeds, so the schedule is the only difference between runs.
struct SweepSpec {
    harness::RunConfig base;
    std::vector<Variant> variants;
    std::filesystem::path output_dir;
};

/// Throws ConfigError on an empty or duplicate-named variant list.
void validate(const SweepSpec& spec);

/// The four policies with their default parameters on the base schedule's
/// peak_lr and warmup_steps, named after the policies.
std::vector<Variant> default_variants(const schedule::ScheduleConfig& base);

/// {"base": RunConfig, "variants": [{"name", "schedule"}...], "output_dir"}.
/// Omitted variants mean default_variants(base.schedule).
SweepSpec sweep_spec_from_json(const nlohmann::json& doc);

struct SummaryRow {
    std::string variant;
    harness::RunStatus status = harness::RunStatus::kInconclusive;
    double final_loss = 0.0;
    std::optional<std::int64_t> first_spike_step;
    std::string init_fingerprint;
    /// Set when the run threw instead of completing; status is then meaningless.
    std::optional<std::string> error;
};

struct SweepResult {
    std::vector<SummaryRow> summary;
    std::vector<harness::TrainResult> runs;
    /// Every variant started from byte-identical parameters.
    bool shared_init = false;

    bool all_completed() const;
};

/// Runs every variant, up to `jobs` at a time. A variant that throws is
/// recorded in its summary row and does not stop the others. When output_dir is non-empty,
/// writes <dir>/<variant>/{metrics.csv,verdict.json,schedule.csv,config.json}
/// and <dir>/{summary.csv,summary_meta.json}. Results are in variant order
/// regardless of `jobs`.
SweepResult run_sweep(const SweepSpec& spec, int jobs = 1);

/// CSV `variant,status,final_loss,first_spike_step`; crashed variants have
/// status `crashed` and an empty final_loss.
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace warmlab::sweep
