// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <sstream>

#include "warmlab/error.hpp"
#include "warmlab/tensor_io.hpp"
#include "warmlab/trainer.hpp"

namespace warmlab::harness {

namespace {

/// Dotted path of the first difference between two JSON documents, or "".
std::string first_difference(const nlohmann::json& stored, const nlohmann::json& current, const std::string& path) {
    if (stored.is_object() && current.is_object()) {
        for (auto it = current.begin(); it != current.end(); ++it) {
            const std::string child = path.empty() ? it.key() : path + "." + it.key();
            auto other = stored.find(it.key());
            if (other == stored.end()) return child;
            if (auto d = first_difference(*other, it.value(), child); !d.empty()) return d;
        }
        for (auto it = stored.begin(); it != stored.end(); ++it) {
            if (!current.contains(it.key())) return path.empty() ? it.key() : path + "." + it.key();
        }
        return "";
    }
    return stored == current ? "" : (path.empty() ? "<root>" : path);
}

}  // namespace

std::string config_hash(const RunConfig& config) {
    return io::hex64(io::fingerprint(resumable_fields(config).dump()));
}

nlohmann::json checkpoint_to_json(const RunConfig& config, const TrainState& state) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : state.params) params.push_back(io::tensor_to_json(p));
    return {{"format", "warmlab-checkpoint"},
            {"version", kCheckpointVersion},
            {"config_hash", config_hash(config)},
            {"config", resumable_fields(config)},
            {"step", state.step},
            {"data_cursor", state.data_cursor},
            {"params", params},
            {"adam", optim::to_json(state.adam)}};
}

TrainState resume(const nlohmann::json& ckpt, const RunConfig& config) {
    if (!ckpt.is_object() || ckpt.value("format", "") != "warmlab-checkpoint") {
        throw LoadError("format", "not a warmlab checkpoint");
    }
    if (ckpt.value("version", -1) != kCheckpointVersion) {
        throw LoadError("version", "unsupported checkpoint version " + ckpt.value("version", nlohmann::json()).dump());
    }
    const auto current = resumable_fields(config);
    if (!ckpt.contains("config")) throw LoadError("config", "missing from checkpoint");
    if (auto diff = first_difference(ckpt["config"], current, ""); !diff.empty()) {
        throw LoadError(diff, "checkpoint was written under a different configuration");
    }
    if (ckpt.value("config_hash", "") != config_hash(config)) {
        throw LoadError("config_hash", "does not match the run configuration");
    }

    TrainState s;
    try {
        s.step = ckpt.at("step").get<std::int64_t>();
        s.data_cursor = ckpt.at("data_cursor").get<std::uint64_t>();
        for (const auto& p : ckpt.at("params")) s.params.push_back(io::tensor_from_json(p, "params"));
        s.adam = optim::adam_state_from_json(ckpt.at("adam"));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("checkpoint", e.what());
    } catch (const ParseError& e) {
        throw LoadError(e.field(), e.detail());
    }
    if (s.adam.m.size() != s.params.size()) throw LoadError("adam", "moment count does not match parameters");
    // Shape check against the configured model.
    try {
        model::ToyModel(config.model, s.params);
    } catch (const ShapeError& e) {
        throw LoadError("params", e.what());
    }
    return s;
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const TrainState& state) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(config, state).dump();
}

TrainState load_checkpoint(const std::filesystem::path& path, const RunConfig& config) {
    std::ifstream in(path);
    if (!in) throw LoadError("path", "cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError("checkpoint", std::string("malformed JSON: ") + e.what());
    }
    return resume(doc, config);
}

}  // namespace warmlab::harness
