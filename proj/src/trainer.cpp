// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/trainer.hpp"

#include <chrono>
#include <cmath>

#include "warmlab/dataset.hpp"
#include "warmlab/error.hpp"
#include "warmlab/model.hpp"

namespace warmlab::harness {

namespace {

struct Split {
    data::Dataset train;
    std::optional<data::Dataset> holdout;
};

Split make_split(const RunConfig& c) {
    auto full = data::gen_dataset(c.data.seed, c.data.num_samples, c.model.input_dim, c.model.num_classes,
                                  c.data.noise_level);
    const auto n = full.size();
    const auto held = static_cast<std::size_t>(std::floor(c.data.holdout_fraction * static_cast<double>(n)));
    if (held == 0) return {std::move(full), std::nullopt};
    return {data::slice(full, 0, n - held), data::slice(full, n - held, held)};
}

}  // namespace

TrainState initial_state(const RunConfig& config) {
    validate(config);
    TrainState s;
    s.params = model::ToyModel::build(config.model).parameters();
    s.adam = optim::AdamState::for_params(s.params);
    return s;
}

TrainResult train(const RunConfig& config, const TrainOptions& options, const TrainState* resume_from) {
    validate(config);
    const auto started = std::chrono::steady_clock::now();

    TrainState state = resume_from ? *resume_from : initial_state(config);
    model::ToyModel net(config.model, std::move(state.params));
    state.params.clear();
    if (state.adam.m.size() != net.parameters().size()) {
        throw LoadError("adam", "moment count does not match the model");
    }

    const auto split = make_split(config);
    data::BatchStream stream(split.train, config.data.seed, state.data_cursor);
    const auto batch_size = static_cast<std::size_t>(config.data.batch_size);

    TrainResult result;
    auto emit = [&](MetricsRow row) {
        row.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
        result.log.push_back(row);
        if (options.on_row) options.on_row(row);
    };

    for (std::int64_t step = state.step + 1; step <= config.total_steps; ++step) {
        const double lr = schedule::lr_at(config.schedule, step);

        double loss = 0.0;
        std::vector<ad::Tensor> grads;
        for (std::int64_t micro = 0; micro < config.grad_accumulation; ++micro) {
            const auto batch = stream.next(batch_size);
            auto lg = model::loss_and_grads(net, batch.inputs, batch.labels, config.label_smoothing);
            loss += lg.loss;
            if (grads.empty()) {
                grads = std::move(lg.grads);
            } else {
                for (std::size_t i = 0; i < grads.size(); ++i)
                    for (std::size_t j = 0; j < grads[i].size(); ++j) grads[i][j] += lg.grads[i][j];
            }
        }
        if (config.grad_accumulation > 1) {
            const double inv = 1.0 / static_cast<double>(config.grad_accumulation);
            loss *= inv;
            for (auto& g : grads)
                for (double& x : g.data()) x *= inv;
        }

        MetricsRow row{step, lr, loss, perplexity(loss), 0.0, 0.0, 0};
        row.grad_norm_preclip = optim::global_grad_norm(grads);
        if (!std::isfinite(loss) || !std::isfinite(row.grad_norm_preclip)) {
            row.grad_norm_postclip = row.grad_norm_preclip;
            emit(row);
            result.stopped_at = step;
            state.data_cursor = stream.cursor();
            break;
        }
        const auto clip = optim::clip_global_norm_inplace(grads, config.clip);
        row.grad_norm_postclip = clip.post_clip_norm;

        optim::adam_step(net.parameters(), grads, state.adam, config.adam, lr);
        state.step = step;
        state.data_cursor = stream.cursor();

        if (step % config.log_every == 0 || step == config.total_steps) {
            emit(row);
            if (split.holdout) {
                auto eval = model::loss_and_grads(net, split.holdout->inputs, split.holdout->labels,
                                                  config.label_smoothing);
                result.validation.push_back({step, eval.loss, perplexity(eval.loss)});
            }
        }
        if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 && options.on_checkpoint) {
            TrainState snapshot{state.step, net.parameters(), state.adam, state.data_cursor};
            options.on_checkpoint(snapshot);
        }
    }

    state.params = net.parameters();
    result.final_state = std::move(state);

    DetectorConfig detector = config.detector;
    if (!detector.burn_in_steps) detector.burn_in_steps = config.total_steps / 10;
    std::vector<MetricsRow> history;
    for (const auto& row : options.prior_log) {
        if (row.step <= (resume_from ? resume_from->step : 0)) history.push_back(row);
    }
    history.insert(history.end(), result.log.begin(), result.log.end());
    if (history.empty()) {
        // Resumed at or past total_steps: nothing ran.
        result.verdict.status = RunStatus::kInconclusive;
        result.verdict.burn_in_steps = *detector.burn_in_steps;
        return result;
    }
    result.verdict = detect_divergence(history, detector);
    if (result.stopped_at) {
        result.verdict.status = RunStatus::kDiverged;
        const auto& last = history.back();
        const bool recorded = !result.verdict.evidence.empty() && result.verdict.evidence.back().step == last.step;
        if (!recorded && std::isfinite(last.loss)) {
            result.verdict.evidence.push_back({last.step, last.grad_norm_preclip});
        }
    }
    return result;
}

}  // namespace warmlab::harness
