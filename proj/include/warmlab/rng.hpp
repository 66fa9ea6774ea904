// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace warmlab::rng {

/// splitmix64 finalizer; spreads nearby seeds apart before seeding mt19937_64.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for (seed, a, b), e.g. (base seed, depth, trial).
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return mix(mix(mix(seed) ^ a) ^ (b * 0xd1342543de82ef95ULL));
}

}  // namespace warmlab::rng
