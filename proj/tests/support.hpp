// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the unit tests and the acceptance runner: seeded random
// generators for property tests and tolerance comparisons.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "warmlab/autodiff.hpp"
#include "warmlab/schedule.hpp"

namespace warmlab::testing {

inline bool rel_close(double actual, double expected, double tol) {
    if (actual == expected) return true;
    return std::abs(actual - expected) <= tol * std::max(std::abs(actual), std::abs(expected));
}

class Gen {
   public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

    ad::Tensor tensor(const ad::Shape& shape, double scale = 1.0) {
        auto t = ad::Tensor::zeros(shape);
        for (double& x : t.data()) x = scale * normal();
        return t;
    }

    /// Random policy parameters on a fixed (peak_lr, warmup_steps) horizon.
    schedule::Policy policy(double peak_lr, std::int64_t warmup_steps) {
        switch (integer(0, warmup_steps >= 2 ? 3 : 2)) {
            case 0:
                return schedule::InverseSqrtLinear{};
            case 1:
                return schedule::Polynomial{log_uniform(0.1, 10.0)};
            case 2:
                return schedule::Exponential{log_uniform(0.01, 10.0)};
            default:
                return schedule::PiecewiseLinear{peak_lr * uniform(0.01, 0.99), integer(1, warmup_steps - 1)};
        }
    }

    schedule::ScheduleConfig schedule_config() {
        const double eta = log_uniform(1e-6, 1e-1);
        const auto w = integer(1, 200000);
        return {eta, w, policy(eta, w)};
    }

    std::mt19937_64& engine() { return engine_; }

   private:
    std::mt19937_64 engine_;
};

/// A scratch directory removed on destruction.
class TempDir {
   public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("warmlab-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

   private:
    std::filesystem::path path_;
};

}  // namespace warmlab::testing
