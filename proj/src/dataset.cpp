// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/dataset.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "warmlab/error.hpp"
#include "warmlab/rng.hpp"

namespace warmlab::data {

Dataset gen_dataset(std::uint64_t seed, std::int64_t num_samples, std::int64_t input_dim,
                    std::int64_t num_classes, double noise_level) {
    if (num_classes < 1) throw ConfigError("model.num_classes", "must be >= 1");
    if (input_dim < 1) throw ConfigError("model.input_dim", "must be >= 1");
    if (num_samples < num_classes) throw ConfigError("data.num_samples", "must be >= num_classes");
    if (!(noise_level >= 0.0 && std::isfinite(noise_level))) throw ConfigError("data.noise_level", "must be >= 0");

    const auto n = static_cast<std::size_t>(num_samples);
    const auto dim = static_cast<std::size_t>(input_dim);
    const auto classes = static_cast<std::size_t>(num_classes);

    std::mt19937_64 gen(rng::mix(seed));
    std::normal_distribution<double> normal(0.0, 1.0);

    Tensor centroids = Tensor::zeros({classes, dim});
    for (double& x : centroids.data()) x = normal(gen);

    Dataset out{Tensor::zeros({n, dim}), std::vector<int>(n), num_classes};
    for (std::size_t i = 0; i < n; ++i) {
        const auto label = i % classes;
        out.labels[i] = static_cast<int>(label);
        for (std::size_t c = 0; c < dim; ++c) {
            const double noise = normal(gen);
            out.inputs.at(i, c) = centroids.at(label, c) + noise_level * noise;
        }
    }
    return out;
}

Dataset slice(const Dataset& source, std::size_t first, std::size_t count) {
    if (count == 0 || first + count > source.size()) throw ContractError("slice: range outside the dataset");
    const auto dim = source.inputs.cols();
    Tensor inputs = Tensor::zeros({count, dim});
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c = 0; c < dim; ++c) inputs.at(r, c) = source.inputs.at(first + r, c);
    return {std::move(inputs),
            std::vector<int>(source.labels.begin() + static_cast<std::ptrdiff_t>(first),
                             source.labels.begin() + static_cast<std::ptrdiff_t>(first + count)),
            source.num_classes};
}

BatchStream::BatchStream(const Dataset& data, std::uint64_t seed, std::uint64_t cursor)
    : data_(&data), seed_(seed), cursor_(cursor) {
    if (data.size() == 0) throw ContractError("BatchStream: empty dataset");
}

const std::vector<std::size_t>& BatchStream::order_for(std::uint64_t pass) {
    if (pass == cached_pass_) return order_;
    order_.resize(data_->size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 gen(rng::derive(seed_, pass, 0x73687566ULL));
    for (std::size_t i = order_.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(gen() % i);
        std::swap(order_[i - 1], order_[j]);
    }
    cached_pass_ = pass;
    return order_;
}

Batch BatchStream::next(std::size_t batch_size) {
    if (batch_size == 0) throw ContractError("BatchStream::next: batch_size must be >= 1");
    const auto n = data_->size();
    const auto dim = data_->inputs.cols();
    Batch batch{Tensor::zeros({batch_size, dim}), std::vector<int>(batch_size)};
    for (std::size_t r = 0; r < batch_size; ++r, ++cursor_) {
        const auto& order = order_for(cursor_ / n);
        const auto src = order[cursor_ % n];
        for (std::size_t c = 0; c < dim; ++c) batch.inputs.at(r, c) = data_->inputs.at(src, c);
        batch.labels[r] = data_->labels[src];
    }
    return batch;
}

}  // namespace warmlab::data
