// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace warmlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// A configuration value violates its invariant. `field()` names the offender
/// using a dotted path such as "policy.alpha".
class ConfigError : public Error {
   public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)), detail_(what) {}

    const std::string& field() const noexcept { return field_; }
    /// The message without the field prefix.
    const std::string& detail() const noexcept { return detail_; }

   private:
    std::string field_;
    std::string detail_;
};

/// Malformed serialized input (JSON, CSV, checkpoint text).
class ParseError : public ConfigError {
   public:
    using ConfigError::ConfigError;
};

/// Tensor shapes are incompatible for the requested operation.
class ShapeError : public Error {
   public:
    using Error::Error;
};

/// A caller broke an API precondition (non-scalar loss, empty log, ...).
class ContractError : public Error {
   public:
    using Error::Error;
};

/// Out-of-range class label or similar index problem.
class IndexError : public Error {
   public:
    using Error::Error;
};

/// Non-finite value met where a finite one is required.
class NumericError : public Error {
   public:
    NumericError(const std::string& what, std::size_t index = 0)
        : Error(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

   private:
    std::size_t index_;
};

/// Schedules compared on different (peak_lr, warmup_steps) horizons.
class ComparisonError : public Error {
   public:
    using Error::Error;
};

/// A checkpoint cannot be resumed under the given run configuration.
class LoadError : public ConfigError {
   public:
    using ConfigError::ConfigError;
};

}  // namespace warmlab
