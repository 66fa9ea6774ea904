// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "warmlab/tensor_io.hpp"

#include <cstdio>
#include <cstring>

#include "warmlab/error.hpp"

namespace warmlab::io {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, const unsigned char* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= kFnvPrime;
    }
}

}  // namespace

nlohmann::json tensor_to_json(const ad::Tensor& t) {
    nlohmann::json data = nlohmann::json::array();
    for (double x : t.data()) data.push_back(x);
    return {{"shape", t.shape()}, {"data", std::move(data)}};
}

ad::Tensor tensor_from_json(const nlohmann::json& doc, const std::string& field) {
    try {
        auto shape = doc.at("shape").get<ad::Shape>();
        std::vector<double> data;
        const auto& arr = doc.at("data");
        data.reserve(arr.size());
        for (const auto& x : arr) {
            if (!x.is_number()) throw ParseError(field, "tensor entry is not a number");
            data.push_back(x.get<double>());
        }
        return ad::Tensor(std::move(shape), std::move(data));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(field, e.what());
    } catch (const ShapeError& e) {
        throw ParseError(field, e.what());
    }
}

std::uint64_t fingerprint(std::span<const ad::Tensor> tensors) {
    std::uint64_t h = kFnvOffset;
    for (const auto& t : tensors) {
        for (double x : t.data()) {
            unsigned char b[sizeof(double)];
            std::memcpy(b, &x, sizeof(double));
            fnv_mix(h, b, sizeof(b));
        }
    }
    return h;
}

std::uint64_t fingerprint(std::string_view bytes) {
    std::uint64_t h = kFnvOffset;
    fnv_mix(h, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace warmlab::io
