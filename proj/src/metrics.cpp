// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/metrics.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "warmlab/error.hpp"
#include "warmlab/schedule.hpp"

namespace warmlab::harness {

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    return s.substr(i);
}

double parse_real(const std::string& text, const std::string& field) {
    if (text == "nan" || text == "-nan") return std::nan("");
    if (text == "inf") return HUGE_VAL;
    if (text == "-inf") return -HUGE_VAL;
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw ParseError(field, "trailing characters in '" + text + "'");
        return v;
    } catch (const std::invalid_argument&) {
        throw ParseError(field, "not a number: '" + text + "'");
    } catch (const std::out_of_range&) {
        throw ParseError(field, "out of range: '" + text + "'");
    }
}

std::int64_t parse_int(const std::string& text, const std::string& field) {
    std::int64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError(field, "not an integer: '" + text + "'");
    return v;
}

}  // namespace

bool MetricsRow::same_values(const MetricsRow& o) const noexcept {
    return step == o.step && same_bits(lr, o.lr) && same_bits(loss, o.loss) && same_bits(perplexity, o.perplexity) &&
           same_bits(grad_norm_preclip, o.grad_norm_preclip) && same_bits(grad_norm_postclip, o.grad_norm_postclip);
}

double perplexity(double mean_loss) { return std::exp(mean_loss); }

void write_metrics_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
    using schedule::format_real;
    out << r.step << ',' << format_real(r.lr) << ',' << format_real(r.loss) << ',' << format_real(r.perplexity) << ','
        << format_real(r.grad_norm_preclip) << ',' << format_real(r.grad_norm_postclip) << ',' << r.wallclock_ms
        << '\n';
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
    write_metrics_header(out);
    for (const auto& r : rows) write_metrics_row(out, r);
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw ParseError("metrics", "empty input, header expected");

    const auto header = split_csv_line(trim(line));
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column[trim(header[i])] = i;
    const char* required[] = {"step", "lr", "loss", "ppl", "gnorm_preclip", "gnorm_postclip", "wallclock_ms"};
    for (const char* name : required) {
        if (!column.count(name)) throw ParseError(std::string("metrics.") + name, "column missing from header");
    }

    std::vector<MetricsRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("metrics.line" + std::to_string(line_no), "expected " + std::to_string(header.size()) +
                                                                           " cells, got " +
                                                                           std::to_string(cells.size()));
        }
        auto cell = [&](const char* name) { return trim(cells[column[name]]); };
        auto where = [&](const char* name) { return "metrics.line" + std::to_string(line_no) + "." + name; };
        MetricsRow r;
        r.step = parse_int(cell("step"), where("step"));
        r.lr = parse_real(cell("lr"), where("lr"));
        r.loss = parse_real(cell("loss"), where("loss"));
        r.perplexity = parse_real(cell("ppl"), where("ppl"));
        r.grad_norm_preclip = parse_real(cell("gnorm_preclip"), where("gnorm_preclip"));
        r.grad_norm_postclip = parse_real(cell("gnorm_postclip"), where("gnorm_postclip"));
        r.wallclock_ms = parse_int(cell("wallclock_ms"), where("wallclock_ms"));
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------

void validate(const DetectorConfig& c) {
    if (!(c.baseline_threshold > 0.0)) throw ConfigError("detector.baseline_threshold", "must be > 0");
    if (!(c.spike_threshold > c.baseline_threshold)) {
        throw ConfigError("detector.spike_threshold", "must exceed baseline_threshold");
    }
    if (c.burn_in_steps && *c.burn_in_steps < 0) throw ConfigError("detector.burn_in_steps", "must be >= 0");
    if (c.min_spikes < 1) throw ConfigError("detector.min_spikes", "must be >= 1");
}

std::string_view status_name(RunStatus status) {
    switch (status) {
        case RunStatus::kConverged:
            return "converged";
        case RunStatus::kDiverged:
            return "diverged";
        case RunStatus::kInconclusive:
            break;
    }
    return "inconclusive";
}

RunVerdict detect_divergence(std::span<const MetricsRow> log, const DetectorConfig& config) {
    validate(config);
    if (log.empty()) throw ContractError("detect_divergence: empty metrics log");

    RunVerdict verdict;
    verdict.final_loss = log.back().loss;
    verdict.burn_in_steps = config.burn_in_steps.value_or(log.back().step / 10);

    bool all_low = true;
    std::size_t post_burn_in = 0;
    for (const auto& row : log) {
        if (!std::isfinite(row.loss) && !verdict.nonfinite_loss_step) verdict.nonfinite_loss_step = row.step;
        if (row.step <= verdict.burn_in_steps) continue;
        ++post_burn_in;
        const double g = row.grad_norm_preclip;
        // NaN compares false everywhere; count it as a spike.
        if (std::isnan(g) || g > config.spike_threshold) verdict.evidence.push_back({row.step, g});
        if (!(g <= config.baseline_threshold)) all_low = false;
    }

    if (verdict.nonfinite_loss_step ||
        verdict.evidence.size() >= static_cast<std::size_t>(config.min_spikes)) {
        verdict.status = RunStatus::kDiverged;
    } else if (post_burn_in > 0 && all_low && log.back().loss < log.front().loss) {
        verdict.status = RunStatus::kConverged;
    } else {
        verdict.status = RunStatus::kInconclusive;
    }
    return verdict;
}

namespace {

nlohmann::json real_or_string(double x) {
    if (std::isfinite(x)) return x;
    return schedule::format_real(x);
}

}  // namespace

nlohmann::json to_json(const RunVerdict& v) {
    nlohmann::json evidence = nlohmann::json::array();
    for (const auto& e : v.evidence) evidence.push_back({{"step", e.step}, {"grad_norm", real_or_string(e.grad_norm)}});
    nlohmann::json doc = {{"status", std::string(status_name(v.status))},
                          {"evidence", evidence},
                          {"final_loss", real_or_string(v.final_loss)},
                          {"burn_in_steps", v.burn_in_steps}};
    doc["nonfinite_loss_step"] = v.nonfinite_loss_step ? nlohmann::json(*v.nonfinite_loss_step) : nlohmann::json();
    return doc;
}

nlohmann::json to_json(const DetectorConfig& c) {
    nlohmann::json doc = {{"spike_threshold", c.spike_threshold},
                          {"baseline_threshold", c.baseline_threshold},
                          {"min_spikes", c.min_spikes}};
    if (c.burn_in_steps) doc["burn_in_steps"] = *c.burn_in_steps;
    return doc;
}

DetectorConfig detector_config_from_json(const nlohmann::json& doc, const std::string& p) {
    if (!doc.is_object()) throw ParseError("detector", "expected an object");
    DetectorConfig c;
    auto real = [&](const char* key, double& dst) {
        if (auto it = doc.find(key); it != doc.end()) {
            if (!it->is_number()) throw ParseError(p + key, "expected a number");
            dst = it->get<double>();
        }
    };
    real("spike_threshold", c.spike_threshold);
    real("baseline_threshold", c.baseline_threshold);
    if (auto it = doc.find("burn_in_steps"); it != doc.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw ParseError(p + "burn_in_steps", "expected an integer");
        c.burn_in_steps = it->get<std::int64_t>();
    }
    if (auto it = doc.find("min_spikes"); it != doc.end()) {
        if (!it->is_number_integer()) throw ParseError(p + "min_spikes", "expected an integer");
        c.min_spikes = it->get<std::int64_t>();
    }
    try {
        validate(c);
    } catch (const ConfigError& e) {
        throw ParseError(e.field(), e.detail());
    }
    return c;
}

}  // namespace warmlab::harness
