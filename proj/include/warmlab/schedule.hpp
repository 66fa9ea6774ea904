// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace warmlab::schedule {

/// Plain linear ramp from 0 to the peak.
struct InverseSqrtLinear {
    bool operator==(const InverseSqrtLinear&) const = default;
};

/// Two chained linear ramps: 0 -> intermediate_lr over intermediate_steps,
/// then intermediate_lr -> peak_lr over the rest of the warmup.
struct PiecewiseLinear {
    double intermediate_lr = 0.0;
    std::int64_t intermediate_steps = 0;
    bool operator==(const PiecewiseLinear&) const = default;
};

/// peak * (step / warmup)^alpha
struct Polynomial {
    double alpha = 1.5;
    bool operator==(const Polynomial&) const = default;
};

/// peak * (exp(alpha * step / warmup) - 1) / (exp(alpha) - 1)
struct Exponential {
    double alpha = 1.5;
    bool operator==(const Exponential&) const = default;
};

using Policy = std::variant<InverseSqrtLinear, PiecewiseLinear, Polynomial, Exponential>;

/// A warmup policy plus the shared peak and warmup horizon. After the warmup
/// every policy decays as peak * sqrt(warmup / step).
struct ScheduleConfig {
    double peak_lr = 2e-4;
    std::int64_t warmup_steps = 50000;
    Policy policy = InverseSqrtLinear{};

    bool operator==(const ScheduleConfig&) const = default;
};

/// Throws ConfigError naming the first violated invariant.
void validate(const ScheduleConfig& config);

/// Wire name of the policy: inverse_sqrt, piecewise_linear, polynomial, exponential.
std::string_view policy_name(const Policy& policy);

/// Learning rate at an optimizer step. Pure; validates `config` on every call.
/// Step 0 is always 0, steps >= warmup_steps are in the decay branch.
double lr_at(const ScheduleConfig& config, std::int64_t step);

namespace defaults {

inline constexpr double kPeakLr = 2e-4;
inline constexpr std::int64_t kWarmupSteps = 50000;
inline constexpr double kAlpha = 1.5;

ScheduleConfig inverse_sqrt(double peak_lr = kPeakLr, std::int64_t warmup_steps = kWarmupSteps);
/// Intermediate point at (warmup / 2, peak / 10).
ScheduleConfig piecewise_linear(double peak_lr = kPeakLr, std::int64_t warmup_steps = kWarmupSteps);
ScheduleConfig polynomial(double peak_lr = kPeakLr, std::int64_t warmup_steps = kWarmupSteps,
                          double alpha = kAlpha);
ScheduleConfig exponential(double peak_lr = kPeakLr, std::int64_t warmup_steps = kWarmupSteps,
                           double alpha = kAlpha);
/// The four policies above, in that order, sharing one horizon.
std::vector<ScheduleConfig> all(double peak_lr = kPeakLr, std::int64_t warmup_steps = kWarmupSteps);

}  // namespace defaults

// ---------------------------------------------------------------------------
// Tabulation

struct ScheduleRow {
    std::int64_t step = 0;
    double lr = 0.0;
    bool operator==(const ScheduleRow&) const = default;
};

struct ScheduleTable {
    ScheduleConfig config;
    std::vector<ScheduleRow> rows;
};

/// Rows at 0, stride, 2*stride, ... <= max_step.
ScheduleTable schedule_table(const ScheduleConfig& config, std::int64_t max_step, std::int64_t stride);

/// Formats a real with 17 significant digits, the precision used by every CSV
/// this project writes.
std::string format_real(double value);

/// CSV `step,lr`.
void write_csv(std::ostream& out, const ScheduleTable& table);

/// Overlay CSV: `step,<name_0>,<name_1>,...`, one lr column per config.
void write_overlay_csv(std::ostream& out, std::span<const ScheduleConfig> configs,
                       std::span<const std::string> column_names, std::int64_t max_step,
                       std::int64_t stride);

// ---------------------------------------------------------------------------
// Crossover analysis

struct StepRange {
    std::int64_t first = 0;
    std::int64_t last = 0;  // inclusive
};

enum class Lead {
    kFirst,   // the first schedule has the higher LR
    kSecond,  // the second schedule has the higher LR
};

struct Crossover {
    std::int64_t step = 0;
    Lead before = Lead::kFirst;  // who led before `step`
    Lead after = Lead::kSecond;  // who leads from `step` on
    bool operator==(const Crossover&) const = default;
};

/// Integer steps in `range` where the sign of lr_at(a) - lr_at(b) flips
/// relative to the last step with a non-tied sign. Steps where both schedules
/// agree to within a few ulps count as ties and carry no sign.
/// Throws ComparisonError when a and b do not share peak_lr and warmup_steps.
std::vector<Crossover> crossovers(const ScheduleConfig& a, const ScheduleConfig& b, StepRange range);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const ScheduleConfig& config);
/// Throws ParseError with the offending field path.
ScheduleConfig from_json(const nlohmann::json& doc, const std::string& path_prefix = "");

std::string serialize(const ScheduleConfig& config);
ScheduleConfig deserialize(std::string_view text);

}  // namespace warmlab::schedule
