// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "warmlab/error.hpp"
#include "warmlab/model.hpp"
#include "warmlab/run_config.hpp"
#include "warmlab/schedule.hpp"
#include "warmlab/sweep.hpp"
#include "warmlab/trainer.hpp"

namespace warmlab::cli {

namespace fs = std::filesystem;

namespace {

/// Raised for bad invocations; carries the subcommand for the usage text.
struct UsageError : Error {
    using Error::Error;
};

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path, std::string("malformed JSON: ") + e.what());
    }
}

/// A schedule document, or a run config whose "schedule" section is used.
schedule::ScheduleConfig load_schedule(const std::string& path) {
    const auto doc = read_json_file(path);
    if (doc.is_object() && doc.contains("schedule")) return schedule::from_json(doc["schedule"], "schedule.");
    return schedule::from_json(doc);
}

struct InlineSchedule {
    double peak_lr = schedule::defaults::kPeakLr;
    std::int64_t warmup = schedule::defaults::kWarmupSteps;
    double alpha = schedule::defaults::kAlpha;
    double intermediate_lr = 0.0;        // 0: peak / 10
    std::int64_t intermediate_steps = 0;  // 0: warmup / 2

    void add_to(CLI::App& app) {
        app.add_option("--peak-lr", peak_lr, "Peak learning rate for --policy schedules")->capture_default_str();
        app.add_option("--warmup", warmup, "Warmup steps for --policy schedules")->capture_default_str();
        app.add_option("--alpha", alpha, "Alpha for polynomial/exponential --policy schedules")->capture_default_str();
        app.add_option("--intermediate-lr", intermediate_lr, "Piecewise intermediate LR (default peak/10)");
        app.add_option("--intermediate-steps", intermediate_steps, "Piecewise intermediate steps (default warmup/2)");
    }

    std::vector<schedule::ScheduleConfig> build(const std::string& policy) const {
        using namespace schedule;
        if (policy == "all") return defaults::all(peak_lr, warmup);
        if (policy == "inverse_sqrt") return {defaults::inverse_sqrt(peak_lr, warmup)};
        if (policy == "polynomial") return {defaults::polynomial(peak_lr, warmup, alpha)};
        if (policy == "exponential") return {defaults::exponential(peak_lr, warmup, alpha)};
        if (policy == "piecewise_linear") {
            ScheduleConfig c{peak_lr, warmup,
                             PiecewiseLinear{intermediate_lr > 0 ? intermediate_lr : peak_lr / 10.0,
                                             intermediate_steps > 0 ? intermediate_steps : warmup / 2}};
            return {c};
        }
        throw UsageError("unknown policy '" + policy + "'");
    }
};

struct NamedSchedule {
    std::string name;
    schedule::ScheduleConfig config;
};

std::vector<NamedSchedule> collect_schedules(const std::vector<std::string>& config_paths,
                                             const std::vector<std::string>& policies, const InlineSchedule& inl) {
    std::vector<NamedSchedule> out;
    for (const auto& path : config_paths) {
        auto c = load_schedule(path);
        out.push_back({fs::path(path).stem().string(), c});
    }
    for (const auto& p : policies) {
        for (auto& c : inl.build(p)) out.push_back({std::string(schedule::policy_name(c.policy)), c});
    }
    // Disambiguate repeated names.
    std::map<std::string, int> seen;
    for (auto& s : out) {
        const int n = ++seen[s.name];
        if (n > 1) s.name += "_" + std::to_string(n);
    }
    for (auto& s : out) schedule::validate(s.config);
    return out;
}

/// `out_path` empty means the provided default stream.
template <class Fn>
void with_output(const std::string& out_path, std::ostream& fallback, Fn&& fn) {
    if (out_path.empty() || out_path == "-") {
        fn(fallback);
        return;
    }
    const fs::path p(out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream file(p);
    if (!file) throw UsageError("cannot write '" + out_path + "'");
    fn(file);
}

struct DetectorFlags {
    double spike = 100.0;
    double baseline = 25.0;
    std::int64_t burn_in = 0;
    std::int64_t min_spikes = 1;
    CLI::Option* spike_opt = nullptr;
    CLI::Option* baseline_opt = nullptr;
    CLI::Option* burn_in_opt = nullptr;
    CLI::Option* min_spikes_opt = nullptr;

    void add_to(CLI::App& app) {
        spike_opt = app.add_option("--spike", spike, "Gradient-norm spike threshold (default 100)");
        baseline_opt = app.add_option("--baseline", baseline, "Healthy gradient-norm ceiling (default 25)");
        burn_in_opt = app.add_option("--burn-in", burn_in, "Steps ignored by the detector (default 10% of run)");
        min_spikes_opt = app.add_option("--min-spikes", min_spikes, "Spikes needed to call divergence (default 1)");
    }

    harness::DetectorConfig apply(harness::DetectorConfig c) const {
        if (spike_opt->count()) c.spike_threshold = spike;
        if (baseline_opt->count()) c.baseline_threshold = baseline;
        if (burn_in_opt->count()) c.burn_in_steps = burn_in;
        if (min_spikes_opt->count()) c.min_spikes = min_spikes;
        harness::validate(c);
        return c;
    }
};

std::pair<std::int64_t, std::int64_t> parse_range(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw UsageError("--range expects FIRST:LAST, got '" + text + "'");
    try {
        std::size_t used_a = 0, used_b = 0;
        const auto a = std::stoll(text.substr(0, colon), &used_a);
        const auto b = std::stoll(text.substr(colon + 1), &used_b);
        if (used_a != colon || used_b != text.size() - colon - 1) throw std::invalid_argument("trailing");
        return {a, b};
    } catch (const std::logic_error&) {
        throw UsageError("--range expects FIRST:LAST, got '" + text + "'");
    }
}

// ---------------------------------------------------------------------------

int cmd_schedule(const std::vector<std::string>& configs, const std::vector<std::string>& policies,
                 const InlineSchedule& inl, std::int64_t max_step, std::int64_t stride, const std::string& out_path,
                 std::ostream& out) {
    auto schedules = collect_schedules(configs, configs.empty() && policies.empty()
                                                    ? std::vector<std::string>{"all"}
                                                    : policies,
                                       inl);
    with_output(out_path, out, [&](std::ostream& os) {
        if (schedules.size() == 1) {
            schedule::write_csv(os, schedule::schedule_table(schedules[0].config, max_step, stride));
            return;
        }
        std::vector<schedule::ScheduleConfig> cs;
        std::vector<std::string> names;
        for (auto& s : schedules) {
            cs.push_back(s.config);
            names.push_back(s.name);
        }
        schedule::write_overlay_csv(os, cs, names, max_step, stride);
    });
    return kExitOk;
}

int cmd_crossover(const std::vector<std::string>& configs, const std::vector<std::string>& policies,
                  const InlineSchedule& inl, const std::string& range_text, std::ostream& out) {
    const auto schedules = collect_schedules(configs, policies, inl);
    if (schedules.size() != 2) {
        throw UsageError("crossover needs exactly two schedules, got " + std::to_string(schedules.size()));
    }
    const auto& a = schedules[0];
    const auto& b = schedules[1];
    schedule::StepRange range{1, a.config.warmup_steps};
    if (!range_text.empty()) {
        const auto [first, last] = parse_range(range_text);
        range = {first, last};
    }
    const auto found = schedule::crossovers(a.config, b.config, range);
    out << "comparing " << a.name << " vs " << b.name << " over steps [" << range.first << ", " << range.last
        << "]\n";
    if (found.empty()) {
        out << "no crossovers\n";
        return kExitOk;
    }
    auto name = [&](schedule::Lead l) { return l == schedule::Lead::kFirst ? a.name : b.name; };
    for (const auto& c : found) {
        out << "crossover at step " << c.step << ": " << name(c.before) << " leads before, " << name(c.after)
            << " leads after\n";
    }
    return kExitOk;
}

/// Rows up to `step` from the metrics.csv of the run that wrote `checkpoint`,
/// found next to it or one directory up (<run>/checkpoints/step_N.json).
std::vector<harness::MetricsRow> prior_metrics(const fs::path& checkpoint, std::int64_t step) {
    for (const auto& dir : {checkpoint.parent_path(), checkpoint.parent_path().parent_path()}) {
        std::ifstream in(dir / "metrics.csv");
        if (!in) continue;
        std::vector<harness::MetricsRow> rows;
        try {
            rows = harness::read_metrics_csv(in);
        } catch (const ParseError&) {
            return {};
        }
        std::erase_if(rows, [&](const harness::MetricsRow& r) { return r.step > step; });
        return rows;
    }
    return {};
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::string& resume_path,
              const DetectorFlags& det, std::ostream& out) {
    auto config = harness::run_config_from_json(read_json_file(config_path));
    config.detector = det.apply(config.detector);

    const fs::path dir(out_dir);
    fs::create_directories(dir);

    std::optional<harness::TrainState> resume_state;
    harness::TrainOptions options;
    if (!resume_path.empty()) {
        resume_state = harness::load_checkpoint(resume_path, config);
        options.prior_log = prior_metrics(resume_path, resume_state->step);
    }

    // Read before opening: --out may be the directory being resumed.
    std::ofstream metrics(dir / "metrics.csv");
    harness::write_metrics_header(metrics);
    for (const auto& row : options.prior_log) harness::write_metrics_row(metrics, row);
    options.on_row = [&](const harness::MetricsRow& row) { harness::write_metrics_row(metrics, row); };
    options.on_checkpoint = [&](const harness::TrainState& state) {
        harness::save_checkpoint(dir / "checkpoints" / ("step_" + std::to_string(state.step) + ".json"), config,
                                 state);
    };

    const auto result = harness::train(config, options, resume_state ? &*resume_state : nullptr);
    metrics.flush();

    if (!result.validation.empty()) {
        std::ofstream val(dir / "validation.csv");
        val << "step,loss,ppl\n";
        for (const auto& v : result.validation) {
            val << v.step << ',' << schedule::format_real(v.loss) << ',' << schedule::format_real(v.perplexity)
                << '\n';
        }
    }
    harness::save_checkpoint(dir / "final_checkpoint.json", config, result.final_state);
    {
        auto doc = harness::to_json(result.verdict);
        doc["stopped_at"] = result.stopped_at ? nlohmann::json(*result.stopped_at) : nlohmann::json();
        std::ofstream verdict(dir / "verdict.json");
        verdict << doc.dump(2) << '\n';
    }

    out << "verdict: " << harness::status_name(result.verdict.status) << " after "
        << result.final_state.step << " steps";
    if (!result.log.empty()) out << ", final loss " << schedule::format_real(result.log.back().loss);
    out << '\n';
    return result.verdict.status == harness::RunStatus::kDiverged ? kExitDiverged : kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir, int jobs, const DetectorFlags& det,
              std::ostream& out) {
    auto spec = sweep::sweep_spec_from_json(read_json_file(spec_path));
    if (!out_dir.empty()) spec.output_dir = out_dir;
    if (spec.output_dir.empty()) throw UsageError("sweep needs --out or an output_dir in the spec");
    spec.base.detector = det.apply(spec.base.detector);
    if (jobs < 1) throw UsageError("--jobs must be >= 1");

    const auto result = sweep::run_sweep(spec, jobs);
    sweep::write_summary_csv(out, result.summary);
    return result.all_completed() ? kExitOk : 1;
}

int cmd_detect(const std::string& metrics_path, const DetectorFlags& det, const std::string& out_path,
               std::ostream& out) {
    std::ifstream in(metrics_path);
    if (!in) throw UsageError("cannot open '" + metrics_path + "'");
    const auto rows = harness::read_metrics_csv(in);
    if (rows.empty()) throw ParseError(metrics_path, "no metrics rows");
    const auto verdict = harness::detect_divergence(rows, det.apply({}));
    with_output(out_path, out, [&](std::ostream& os) { os << harness::to_json(verdict).dump(2) << '\n'; });
    return verdict.status == harness::RunStatus::kDiverged ? kExitDiverged : kExitOk;
}

int cmd_probe(const std::string& config_path, const std::vector<std::int64_t>& depths, int trials, bool normalize,
              const std::string& out_path, std::ostream& out) {
    model::StackConfig base;
    if (!config_path.empty()) {
        const auto doc = read_json_file(config_path);
        base = doc.contains("model") ? model::stack_config_from_json(doc["model"])
                                     : model::stack_config_from_json(doc);
    }
    if (normalize) base.normalize_subcomponents = true;
    if (depths.empty()) throw UsageError("--depths needs at least one value");
    for (auto d : depths)
        if (d < 1) throw UsageError("--depths values must be >= 1");
    if (trials < 1) throw UsageError("--trials must be >= 1");
    const auto rows = model::depth_gain_probe(base, depths, trials);
    with_output(out_path, out, [&](std::ostream& os) { model::write_probe_csv(os, rows); });
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"warmlab: learning-rate warmup laboratory", "warmlab"};
    app.require_subcommand(1);

    // schedule
    std::vector<std::string> s_configs, s_policies;
    InlineSchedule s_inline;
    std::int64_t s_max_step = 250000, s_stride = 1000;
    std::string s_out;
    auto* sched = app.add_subcommand("schedule", "Tabulate one or more LR schedules as CSV");
    sched->add_option("--config", s_configs, "Schedule (or run config) JSON file; repeatable");
    sched->add_option("--policy", s_policies,
                      "inverse_sqrt | piecewise_linear | polynomial | exponential | all; repeatable");
    s_inline.add_to(*sched);
    sched->add_option("--max-step", s_max_step, "Last step to tabulate")->capture_default_str();
    sched->add_option("--stride", s_stride, "Step increment")->capture_default_str();
    sched->add_option("--out", s_out, "Output CSV (default stdout)");

    // crossover
    std::vector<std::string> c_configs, c_policies;
    InlineSchedule c_inline;
    std::string c_range;
    auto* cross = app.add_subcommand("crossover", "Find steps where one schedule overtakes another");
    cross->add_option("--config", c_configs, "Schedule JSON file; give two in total with --policy");
    cross->add_option("--policy", c_policies, "Default-parameter policy; repeatable");
    c_inline.add_to(*cross);
    cross->add_option("--range", c_range, "FIRST:LAST step range (default 1:warmup)");

    // train
    std::string t_config, t_out = "run", t_resume;
    DetectorFlags t_det;
    auto* trn = app.add_subcommand("train", "Run one training job");
    trn->add_option("--config", t_config, "Run config JSON")->required();
    trn->add_option("--out", t_out, "Output directory")->capture_default_str();
    trn->add_option("--resume", t_resume, "Checkpoint to resume from");
    t_det.add_to(*trn);

    // sweep
    std::string w_config, w_out;
    int w_jobs = 1;
    DetectorFlags w_det;
    auto* swp = app.add_subcommand("sweep", "Run one training job per schedule variant");
    swp->add_option("--config", w_config, "Sweep spec JSON")->required();
    swp->add_option("--out", w_out, "Output directory (overrides the spec)");
    swp->add_option("--jobs", w_jobs, "Variants run concurrently")->capture_default_str();
    w_det.add_to(*swp);

    // detect
    std::string d_metrics, d_out;
    DetectorFlags d_det;
    auto* det = app.add_subcommand("detect", "Classify a metrics log as converged, diverged or inconclusive");
    det->add_option("metrics,--metrics", d_metrics, "Metrics CSV")->required();
    det->add_option("--out", d_out, "Verdict JSON (default stdout)");
    d_det.add_to(*det);

    // probe
    std::string p_config, p_out;
    std::vector<std::int64_t> p_depths{2, 4, 8, 16};
    int p_trials = 8;
    bool p_normalize = false;
    auto* prb = app.add_subcommand("probe", "Measure activation and gradient norms against depth");
    prb->add_option("--config", p_config, "Model (or run config) JSON");
    prb->add_option("--depths", p_depths, "Depths to probe")->delimiter(',')->capture_default_str();
    prb->add_option("--trials", p_trials, "Models per depth")->capture_default_str();
    prb->add_flag("--normalize", p_normalize, "Enable per-subcomponent layer norm");
    prb->add_option("--out", p_out, "Output CSV (default stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    CLI::App* active = nullptr;
    try {
        if (sched->parsed()) {
            active = sched;
            if (s_stride <= 0) throw UsageError("--stride must be >= 1");
            if (s_max_step < 0) throw UsageError("--max-step must be >= 0");
            return cmd_schedule(s_configs, s_policies, s_inline, s_max_step, s_stride, s_out, out);
        }
        if (cross->parsed()) {
            active = cross;
            return cmd_crossover(c_configs, c_policies, c_inline, c_range, out);
        }
        if (trn->parsed()) {
            active = trn;
            return cmd_train(t_config, t_out, t_resume, t_det, out);
        }
        if (swp->parsed()) {
            active = swp;
            return cmd_sweep(w_config, w_out, w_jobs, w_det, out);
        }
        if (det->parsed()) {
            active = det;
            return cmd_detect(d_metrics, d_det, d_out, out);
        }
        if (prb->parsed()) {
            active = prb;
            return cmd_probe(p_config, p_depths, p_trials, p_normalize, p_out, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << (active ? active->help() : app.help());
        return kExitUsage;
    } catch (const ComparisonError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace warmlab::cli
