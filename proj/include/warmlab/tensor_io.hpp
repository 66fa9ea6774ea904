// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "json.hpp"
#include "warmlab/autodiff.hpp"

namespace warmlab::io {

// {"shape": [...], "data": [...]}. Doubles survive the text round trip exactly.
nlohmann::json tensor_to_json(const ad::Tensor& t);
ad::Tensor tensor_from_json(const nlohmann::json& doc, const std::string& field);

/// FNV-1a over the raw bytes of every entry, in order.
std::uint64_t fingerprint(std::span<const ad::Tensor> tensors);
std::uint64_t fingerprint(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace warmlab::io
