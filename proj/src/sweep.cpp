// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "warmlab/error.hpp"
#include "warmlab/model.hpp"
#include "warmlab/tensor_io.hpp"

namespace warmlab::sweep {

void validate(const SweepSpec& spec) {
    harness::validate(spec.base);
    if (spec.variants.empty()) throw ConfigError("variants", "at least one variant required");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < spec.variants.size(); ++i) {
        const auto& v = spec.variants[i];
        const auto field = "variants[" + std::to_string(i) + "]";
        if (v.name.empty() || v.name.find_first_of("/\\,") != std::string::npos) {
            throw ConfigError(field + ".name", "must be non-empty and free of '/', '\\' and ','");
        }
        if (!seen.insert(v.name).second) throw ConfigError(field + ".name", "duplicate variant name '" + v.name + "'");
        schedule::validate(v.schedule);
    }
}

std::vector<Variant> default_variants(const schedule::ScheduleConfig& base) {
    std::vector<Variant> out;
    for (auto& c : schedule::defaults::all(base.peak_lr, base.warmup_steps)) {
        out.push_back({std::string(schedule::policy_name(c.policy)), c});
    }
    return out;
}

SweepSpec sweep_spec_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("<root>", "expected an object");
    auto base = doc.find("base");
    if (base == doc.end()) throw ParseError("base", "missing field");

    SweepSpec spec;
    spec.base = harness::run_config_from_json(*base);
    if (auto it = doc.find("variants"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("variants", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& v = (*it)[i];
            const auto field = "variants[" + std::to_string(i) + "].";
            if (!v.is_object() || !v.contains("name") || !v["name"].is_string()) {
                throw ParseError(field + "name", "expected a string");
            }
            if (!v.contains("schedule")) throw ParseError(field + "schedule", "missing field");
            spec.variants.push_back({v["name"].get<std::string>(), schedule::from_json(v["schedule"], field + "schedule.")});
        }
    } else {
        spec.variants = default_variants(spec.base.schedule);
    }
    if (auto it = doc.find("output_dir"); it != doc.end()) {
        if (!it->is_string()) throw ParseError("output_dir", "expected a string");
        spec.output_dir = it->get<std::string>();
    }
    try {
        validate(spec);
    } catch (const ParseError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ParseError(e.field(), e.detail());
    }
    return spec;
}

namespace {

void write_variant_artifacts(const std::filesystem::path& dir, const harness::RunConfig& config,
                             const harness::TrainResult& run) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "metrics.csv");
        harness::write_metrics_csv(out, run.log);
    }
    {
        std::ofstream out(dir / "verdict.json");
        out << harness::to_json(run.verdict).dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "schedule.csv");
        schedule::write_csv(out, schedule::schedule_table(config.schedule, config.total_steps, 1));
    }
    {
        std::ofstream out(dir / "config.json");
        out << harness::to_json(config).dump(2) << '\n';
    }
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, int jobs) {
    validate(spec);
    const auto n = spec.variants.size();
    SweepResult result;
    result.runs.resize(n);
    result.summary.resize(n);

    std::vector<harness::RunConfig> configs(n, spec.base);
    for (std::size_t i = 0; i < n; ++i) configs[i].schedule = spec.variants[i].schedule;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            auto& row = result.summary[i];
            row.variant = spec.variants[i].name;
            try {
                const auto init = harness::initial_state(configs[i]);
                row.init_fingerprint = io::hex64(io::fingerprint(init.params));

                result.runs[i] = harness::train(configs[i], {}, &init);
                const auto& run = result.runs[i];
                row.status = run.verdict.status;
                row.final_loss = run.log.empty() ? 0.0 : run.log.back().loss;
                if (!run.verdict.evidence.empty()) row.first_spike_step = run.verdict.evidence.front().step;
                if (!spec.output_dir.empty()) {
                    write_variant_artifacts(spec.output_dir / spec.variants[i].name, configs[i], run);
                }
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };

    const auto threads = static_cast<std::size_t>(std::clamp<int>(jobs, 1, static_cast<int>(n)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    result.shared_init = std::all_of(result.summary.begin(), result.summary.end(), [&](const SummaryRow& r) {
        return r.init_fingerprint == result.summary.front().init_fingerprint;
    });

    if (!spec.output_dir.empty()) {
        std::filesystem::create_directories(spec.output_dir);
        std::ofstream out(spec.output_dir / "summary.csv");
        write_summary_csv(out, result.summary);
        nlohmann::json fingerprints = nlohmann::json::object();
        nlohmann::json errors = nlohmann::json::object();
        for (const auto& r : result.summary) {
            fingerprints[r.variant] = r.init_fingerprint;
            if (r.error) errors[r.variant] = *r.error;
        }
        std::ofstream meta(spec.output_dir / "summary_meta.json");
        meta << nlohmann::json{{"shared_init", result.shared_init},
                               {"init_fingerprints", fingerprints},
                               {"errors", errors},
                               {"base_config", harness::to_json(spec.base)}}
                    .dump(2)
             << '\n';
    }
    return result;
}

bool SweepResult::all_completed() const {
    return std::none_of(summary.begin(), summary.end(), [](const SummaryRow& r) { return r.error.has_value(); });
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "variant,status,final_loss,first_spike_step\n";
    for (const auto& r : rows) {
        if (r.error) {
            out << r.variant << ",crashed,,\n";
            continue;
        }
        out << r.variant << ',' << harness::status_name(r.status) << ',' << schedule::format_real(r.final_loss) << ',';
        if (r.first_spike_step) out << *r.first_spike_step;
        out << '\n';
    }
}

}  // namespace warmlab::sweep
