// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "warmlab/error.hpp"

namespace warmlab::schedule {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void validate(const ScheduleConfig& config) {
    if (!positive_finite(config.peak_lr)) {
        throw ConfigError("peak_lr", "must be a positive finite real");
    }
    if (config.warmup_steps < 1) {
        throw ConfigError("warmup_steps", "must be >= 1");
    }
    std::visit(Overloaded{
                   [](const InverseSqrtLinear&) {},
                   [&](const PiecewiseLinear& p) {
                       if (!positive_finite(p.intermediate_lr) || p.intermediate_lr >= config.peak_lr) {
                           throw ConfigError("policy.intermediate_lr", "must satisfy 0 < intermediate_lr < peak_lr");
                       }
                       if (p.intermediate_steps <= 0 || p.intermediate_steps >= config.warmup_steps) {
                           throw ConfigError("policy.intermediate_steps",
                                             "must satisfy 0 < intermediate_steps < warmup_steps");
                       }
                   },
                   [](const Polynomial& p) {
                       if (!positive_finite(p.alpha)) throw ConfigError("policy.alpha", "must be > 0");
                   },
                   [](const Exponential& p) {
                       if (!positive_finite(p.alpha)) throw ConfigError("policy.alpha", "must be > 0");
                   },
               },
               config.policy);
}

std::string_view policy_name(const Policy& policy) {
    return std::visit(Overloaded{
                          [](const InverseSqrtLinear&) { return std::string_view("inverse_sqrt"); },
                          [](const PiecewiseLinear&) { return std::string_view("piecewise_linear"); },
                          [](const Polynomial&) { return std::string_view("polynomial"); },
                          [](const Exponential&) { return std::string_view("exponential"); },
                      },
                      policy);
}

double lr_at(const ScheduleConfig& config, std::int64_t step) {
    validate(config);
    if (step < 0) {
        throw ConfigError("step", "must be >= 0");
    }
    if (step == 0) {
        return 0.0;
    }
    const double eta = config.peak_lr;
    const auto w = config.warmup_steps;
    const double i = static_cast<double>(step);
    const double wd = static_cast<double>(w);

    if (step >= w) {
        return eta * std::sqrt(wd / i);
    }

    const double progress = i / wd;
    return std::visit(
        Overloaded{
            [&](const InverseSqrtLinear&) { return eta * progress; },
            [&](const PiecewiseLinear& p) {
                // Phase selection by step; identical to max() of the two ramps
                // whenever the first ramp is no steeper than the second.
                const double eta1 = p.intermediate_lr;
                const auto w1 = p.intermediate_steps;
                if (step < w1) {
                    return eta1 * (i / static_cast<double>(w1));
                }
                return eta1 + (eta - eta1) * static_cast<double>(step - w1) / static_cast<double>(w - w1);
            },
            [&](const Polynomial& p) { return eta * std::pow(progress, p.alpha); },
            [&](const Exponential& p) { return eta * (std::expm1(p.alpha * progress) / std::expm1(p.alpha)); },
        },
        config.policy);
}

namespace defaults {

ScheduleConfig inverse_sqrt(double peak_lr, std::int64_t warmup_steps) {
    return {peak_lr, warmup_steps, InverseSqrtLinear{}};
}

ScheduleConfig piecewise_linear(double peak_lr, std::int64_t warmup_steps) {
    return {peak_lr, warmup_steps, PiecewiseLinear{peak_lr / 10.0, warmup_steps / 2}};
}

ScheduleConfig polynomial(double peak_lr, std::int64_t warmup_steps, double alpha) {
    return {peak_lr, warmup_steps, Polynomial{alpha}};
}

ScheduleConfig exponential(double peak_lr, std::int64_t warmup_steps, double alpha) {
    return {peak_lr, warmup_steps, Exponential{alpha}};
}

std::vector<ScheduleConfig> all(double peak_lr, std::int64_t warmup_steps) {
    return {inverse_sqrt(peak_lr, warmup_steps), piecewise_linear(peak_lr, warmup_steps),
            polynomial(peak_lr, warmup_steps), exponential(peak_lr, warmup_steps)};
}

}  // namespace defaults

ScheduleTable schedule_table(const ScheduleConfig& config, std::int64_t max_step, std::int64_t stride) {
    validate(config);
    if (stride <= 0) {
        throw ConfigError("stride", "must be >= 1");
    }
    if (max_step < 0) {
        throw ConfigError("max_step", "must be >= 0");
    }
    ScheduleTable table{config, {}};
    table.rows.reserve(static_cast<std::size_t>(max_step / stride + 1));
    for (std::int64_t step = 0; step <= max_step; step += stride) {
        table.rows.push_back({step, lr_at(config, step)});
        if (step > max_step - stride) break;  // overflow guard for huge strides
    }
    return table;
}

std::string format_real(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_csv(std::ostream& out, const ScheduleTable& table) {
    out << "step,lr\n";
    for (const auto& row : table.rows) {
        out << row.step << ',' << format_real(row.lr) << '\n';
    }
}

void write_overlay_csv(std::ostream& out, std::span<const ScheduleConfig> configs,
                       std::span<const std::string> column_names, std::int64_t max_step,
                       std::int64_t stride) {
    if (configs.size() != column_names.size()) {
        throw ContractError("write_overlay_csv: one column name per config required");
    }
    std::vector<ScheduleTable> tables;
    tables.reserve(configs.size());
    for (const auto& c : configs) tables.push_back(schedule_table(c, max_step, stride));

    out << "step";
    for (const auto& name : column_names) out << ',' << name;
    out << '\n';
    const std::size_t rows = tables.empty() ? 0 : tables.front().rows.size();
    for (std::size_t r = 0; r < rows; ++r) {
        out << tables.front().rows[r].step;
        for (const auto& t : tables) out << ',' << format_real(t.rows[r].lr);
        out << '\n';
    }
}

std::vector<Crossover> crossovers(const ScheduleConfig& a, const ScheduleConfig& b, StepRange range) {
    validate(a);
    validate(b);
    if (a.peak_lr != b.peak_lr || a.warmup_steps != b.warmup_steps) {
        throw ComparisonError("crossovers: schedules must share peak_lr and warmup_steps");
    }
    if (range.first < 0 || range.last < range.first) {
        throw ConfigError("range", "must satisfy 0 <= first <= last");
    }

    constexpr double kTieUlps = 4.0;
    auto sign_at = [&](std::int64_t s) {
        const double la = lr_at(a, s);
        const double lb = lr_at(b, s);
        const double diff = la - lb;
        const double scale = std::max(std::abs(la), std::abs(lb));
        if (std::abs(diff) <= kTieUlps * std::numeric_limits<double>::epsilon() * scale) return 0;
        return diff > 0 ? 1 : -1;
    };
    auto lead_of = [](int sign) { return sign > 0 ? Lead::kFirst : Lead::kSecond; };

    std::vector<Crossover> out;
    int last_sign = sign_at(range.first);
    for (std::int64_t s = range.first + 1; s <= range.last; ++s) {
        const int sign = sign_at(s);
        if (sign == 0) continue;
        if (last_sign != 0 && sign != last_sign) {
            out.push_back({s, lead_of(last_sign), lead_of(sign)});
        }
        last_sign = sign;
    }
    return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const ScheduleConfig& config) {
    nlohmann::json policy = {{"type", std::string(policy_name(config.policy))}};
    std::visit(Overloaded{
                   [](const InverseSqrtLinear&) {},
                   [&](const PiecewiseLinear& p) {
                       policy["intermediate_lr"] = p.intermediate_lr;
                       policy["intermediate_steps"] = p.intermediate_steps;
                   },
                   [&](const Polynomial& p) { policy["alpha"] = p.alpha; },
                   [&](const Exponential& p) { policy["alpha"] = p.alpha; },
               },
               config.policy);
    return {{"peak_lr", config.peak_lr}, {"warmup_steps", config.warmup_steps}, {"policy", policy}};
}

namespace {

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + key, "missing field");
    return *it;
}

double read_real(const nlohmann::json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_number()) throw ParseError(path + key, "expected a number");
    return v.get<double>();
}

std::int64_t read_int(const nlohmann::json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_number_integer()) throw ParseError(path + key, "expected an integer");
    return v.get<std::int64_t>();
}

}  // namespace

ScheduleConfig from_json(const nlohmann::json& doc, const std::string& path_prefix) {
    const std::string& p = path_prefix;
    if (!doc.is_object()) throw ParseError(p.empty() ? "<root>" : p, "expected an object");

    ScheduleConfig config;
    config.peak_lr = read_real(doc, "peak_lr", p);
    config.warmup_steps = read_int(doc, "warmup_steps", p);

    const auto& policy = require(doc, "policy", p);
    const std::string pp = p + "policy.";
    if (!policy.is_object()) throw ParseError(p + "policy", "expected an object");
    const auto& type = require(policy, "type", pp);
    if (!type.is_string()) throw ParseError(pp + "type", "expected a string");
    const auto name = type.get<std::string>();
    if (name == "inverse_sqrt") {
        config.policy = InverseSqrtLinear{};
    } else if (name == "piecewise_linear") {
        config.policy = PiecewiseLinear{read_real(policy, "intermediate_lr", pp),
                                        read_int(policy, "intermediate_steps", pp)};
    } else if (name == "polynomial") {
        config.policy = Polynomial{read_real(policy, "alpha", pp)};
    } else if (name == "exponential") {
        config.policy = Exponential{read_real(policy, "alpha", pp)};
    } else {
        throw ParseError(pp + "type", "unknown policy '" + name + "'");
    }

    try {
        validate(config);
    } catch (const ConfigError& e) {
        throw ParseError(p + e.field(), e.detail());
    }
    return config;
}

std::string serialize(const ScheduleConfig& config) { return to_json(config).dump(2); }

ScheduleConfig deserialize(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("<root>", std::string("malformed JSON: ") + e.what());
    }
    return from_json(doc);
}

}  // namespace warmlab::schedule
