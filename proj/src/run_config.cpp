// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/run_config.hpp"

#include <cmath>

#include "warmlab/error.hpp"

namespace warmlab::harness {

namespace {

void rethrow_with_prefix(const ConfigError& e, const std::string& prefix) {
    const auto& f = e.field();
    if (f.rfind(prefix, 0) == 0) throw ConfigError(f, e.detail());
    throw ConfigError(prefix + f, e.detail());
}

}  // namespace

void validate(const RunConfig& c) {
    try {
        schedule::validate(c.schedule);
    } catch (const ConfigError& e) {
        rethrow_with_prefix(e, "schedule.");
    }
    try {
        optim::validate(c.adam);
        optim::validate(c.clip);
    } catch (const ConfigError& e) {
        rethrow_with_prefix(e, "optimizer.");
    }
    model::validate(c.model);
    validate(c.detector);

    if (c.data.num_samples < c.model.num_classes) throw ConfigError("data.num_samples", "must be >= num_classes");
    if (c.data.batch_size < 1) throw ConfigError("data.batch_size", "must be >= 1");
    if (!(c.data.noise_level >= 0.0 && std::isfinite(c.data.noise_level)))
        throw ConfigError("data.noise_level", "must be >= 0");
    if (!(c.data.holdout_fraction >= 0.0 && c.data.holdout_fraction < 1.0))
        throw ConfigError("data.holdout_fraction", "must lie in [0, 1)");
    const auto holdout = static_cast<std::int64_t>(std::floor(c.data.holdout_fraction * c.data.num_samples));
    if (c.data.num_samples - holdout < 1) throw ConfigError("data.holdout_fraction", "leaves no training samples");

    if (c.total_steps < 1) throw ConfigError("total_steps", "must be >= 1");
    if (c.log_every < 1) throw ConfigError("log_every", "must be >= 1");
    if (c.checkpoint_every < 0) throw ConfigError("checkpoint_every", "must be >= 0");
    if (!(c.label_smoothing >= 0.0 && c.label_smoothing < 1.0))
        throw ConfigError("label_smoothing", "must lie in [0, 1)");
    if (c.grad_accumulation < 1) throw ConfigError("grad_accumulation", "must be >= 1");
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json doc;
    doc["schedule"] = schedule::to_json(c.schedule);
    doc["optimizer"] = {{"beta1", c.adam.beta1},
                        {"beta2", c.adam.beta2},
                        {"epsilon", c.adam.epsilon},
                        {"weight_decay", c.adam.weight_decay},
                        {"weight_decay_mode",
                         c.adam.decay_mode == optim::WeightDecayMode::kDecoupled ? "decoupled" : "coupled"},
                        {"clip_max_norm", c.clip.max_norm}};
    doc["model"] = model::to_json(c.model);
    doc["data"] = {{"seed", c.data.seed},
                   {"num_samples", c.data.num_samples},
                   {"batch_size", c.data.batch_size},
                   {"noise_level", c.data.noise_level},
                   {"holdout_fraction", c.data.holdout_fraction}};
    doc["total_steps"] = c.total_steps;
    doc["log_every"] = c.log_every;
    doc["checkpoint_every"] = c.checkpoint_every;
    doc["label_smoothing"] = c.label_smoothing;
    doc["grad_accumulation"] = c.grad_accumulation;
    doc["detector"] = to_json(c.detector);
    return doc;
}

namespace {

class Reader {
   public:
    Reader(const nlohmann::json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) {
            throw ParseError(prefix_.empty() ? "<root>" : prefix_.substr(0, prefix_.size() - 1), "expected an object");
        }
    }

    void real(const char* key, double& dst) const {
        if (auto it = obj_.find(key); it != obj_.end()) {
            if (!it->is_number()) throw ParseError(prefix_ + key, "expected a number");
            dst = it->get<double>();
        }
    }
    void integer(const char* key, std::int64_t& dst) const {
        if (auto it = obj_.find(key); it != obj_.end()) {
            if (!it->is_number_integer()) throw ParseError(prefix_ + key, "expected an integer");
            dst = it->get<std::int64_t>();
        }
    }
    void unsigned_integer(const char* key, std::uint64_t& dst) const {
        if (auto it = obj_.find(key); it != obj_.end()) {
            if (!it->is_number_unsigned()) throw ParseError(prefix_ + key, "expected a non-negative integer");
            dst = it->get<std::uint64_t>();
        }
    }

   private:
    const nlohmann::json& obj_;
    std::string prefix_;
};

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& doc) {
    Reader root(doc, "");
    RunConfig c;

    auto sched = doc.find("schedule");
    if (sched == doc.end()) throw ParseError("schedule", "missing field");
    c.schedule = schedule::from_json(*sched, "schedule.");

    auto mdl = doc.find("model");
    if (mdl == doc.end()) throw ParseError("model", "missing field");
    c.model = model::stack_config_from_json(*mdl, "model.");

    if (auto it = doc.find("optimizer"); it != doc.end()) {
        Reader r(*it, "optimizer.");
        r.real("beta1", c.adam.beta1);
        r.real("beta2", c.adam.beta2);
        r.real("epsilon", c.adam.epsilon);
        r.real("weight_decay", c.adam.weight_decay);
        r.real("clip_max_norm", c.clip.max_norm);
        if (auto m = it->find("weight_decay_mode"); m != it->end()) {
            const auto mode = m->is_string() ? m->get<std::string>() : std::string();
            if (mode == "decoupled") {
                c.adam.decay_mode = optim::WeightDecayMode::kDecoupled;
            } else if (mode == "coupled") {
                c.adam.decay_mode = optim::WeightDecayMode::kCoupled;
            } else {
                throw ParseError("optimizer.weight_decay_mode", "expected \"decoupled\" or \"coupled\"");
            }
        }
    }
    if (auto it = doc.find("data"); it != doc.end()) {
        Reader r(*it, "data.");
        r.unsigned_integer("seed", c.data.seed);
        r.integer("num_samples", c.data.num_samples);
        r.integer("batch_size", c.data.batch_size);
        r.real("noise_level", c.data.noise_level);
        r.real("holdout_fraction", c.data.holdout_fraction);
    }
    root.integer("total_steps", c.total_steps);
    root.integer("log_every", c.log_every);
    root.integer("checkpoint_every", c.checkpoint_every);
    root.real("label_smoothing", c.label_smoothing);
    root.integer("grad_accumulation", c.grad_accumulation);
    if (auto it = doc.find("detector"); it != doc.end()) c.detector = detector_config_from_json(*it);

    try {
        validate(c);
    } catch (const ParseError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ParseError(e.field(), e.detail());
    }
    return c;
}

RunConfig parse_run_config(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("<root>", std::string("malformed JSON: ") + e.what());
    }
    return run_config_from_json(doc);
}

nlohmann::json resumable_fields(const RunConfig& config) {
    auto doc = to_json(config);
    for (const char* key : {"total_steps", "log_every", "checkpoint_every", "detector"}) doc.erase(key);
    return doc;
}

RunConfig tiny_benchmark() {
    RunConfig c;
    c.schedule = schedule::defaults::exponential(5e-3, 100);
    c.model = {.depth = 2,
               .subcomponents_per_block = 2,
               .width = 16,
               .normalize_subcomponents = false,
               .init_scale = 1.0,
               .seed = 7,
               .num_classes = 4,
               .input_dim = 8};
    c.data = {.seed = 11, .num_samples = 512, .batch_size = 32, .noise_level = 0.5, .holdout_fraction = 0.0};
    c.total_steps = 500;
    c.log_every = 1;
    return c;
}

}  // namespace warmlab::harness
