// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "warmlab/autodiff.hpp"

namespace warmlab::data {

using ad::Tensor;

/// Gaussian class blobs: sample i has label i % num_classes and equals its
/// class centroid plus noise_level * N(0, I).
struct Dataset {
    Tensor inputs;  // [num_samples x input_dim]
    std::vector<int> labels;
    std::int64_t num_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
};

/// Deterministic in `seed`. Throws ConfigError unless
/// num_samples >= num_classes >= 1, input_dim >= 1 and noise_level >= 0.
Dataset gen_dataset(std::uint64_t seed, std::int64_t num_samples, std::int64_t input_dim,
                    std::int64_t num_classes, double noise_level);

/// Rows [first, first + count) of `source`.
Dataset slice(const Dataset& source, std::size_t first, std::size_t count);

struct Batch {
    Tensor inputs;
    std::vector<int> labels;
};

/// Cycles through a dataset forever, reshuffling every pass. The order of
/// pass e is a pure function of (seed, e), so the cursor alone restores the
/// stream.
class BatchStream {
   public:
    BatchStream(const Dataset& data, std::uint64_t seed, std::uint64_t cursor = 0);

    Batch next(std::size_t batch_size);

    /// Samples consumed so far.
    std::uint64_t cursor() const noexcept { return cursor_; }

   private:
    const std::vector<std::size_t>& order_for(std::uint64_t pass);

    const Dataset* data_;
    std::uint64_t seed_;
    std::uint64_t cursor_;
    std::uint64_t cached_pass_ = ~0ULL;
    std::vector<std::size_t> order_;
};

}  // namespace warmlab::data
