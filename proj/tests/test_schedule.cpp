// Copyright 2026 The warmlab Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "warmlab/error.hpp"
#include "warmlab/schedule.hpp"

using namespace warmlab;
using namespace warmlab::schedule;
using warmlab::testing::Gen;
using warmlab::testing::rel_close;

namespace {

constexpr double kGoldenTol = 1e-12;

// Reference values below were evaluated with 30-digit arithmetic, not with
// this library.
constexpr double kPoly25k = 7.0710678118654752440e-5;   // 2e-4 * 0.5^1.5
constexpr double kExp25k = 6.4164260164921405368e-5;    // 2e-4 * (e^0.75 - 1) / (e^1.5 - 1)
constexpr double kExpAt[] = {0.0,
                             2.00970736046819100861759667326e-5,
                             4.72252854164649996268692817891e-5,
                             8.3844541064387763626159273643e-5,
                             1.33275365827613602785161182964e-4,
                             2e-4};

std::string config_error_field(const ScheduleConfig& c) {
    try {
        validate(c);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

std::string parse_error_field(const std::string& text) {
    try {
        deserialize(text);
    } catch (const ParseError& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST_CASE("golden values") {
    const auto lin = defaults::inverse_sqrt();
    CHECK(lr_at(lin, 0) == 0.0);
    CHECK(rel_close(lr_at(lin, 50000), 2e-4, kGoldenTol));
    CHECK(rel_close(lr_at(lin, 200000), 1e-4, kGoldenTol));
    CHECK(rel_close(lr_at(lin, 25000), 1e-4, kGoldenTol));

    const auto pw = defaults::piecewise_linear();
    CHECK(std::get<PiecewiseLinear>(pw.policy).intermediate_lr == 2e-5);
    CHECK(std::get<PiecewiseLinear>(pw.policy).intermediate_steps == 25000);
    CHECK(rel_close(lr_at(pw, 25000), 2e-5, kGoldenTol));
    CHECK(rel_close(lr_at(pw, 37500), 1.1e-4, kGoldenTol));
    CHECK(rel_close(lr_at(pw, 12500), 1e-5, kGoldenTol));

    const auto poly = defaults::polynomial();
    CHECK(rel_close(lr_at(poly, 50000), 2e-4, kGoldenTol));
    CHECK(rel_close(lr_at(poly, 25000), kPoly25k, kGoldenTol));

    const auto exp = defaults::exponential();
    CHECK(rel_close(lr_at(exp, 25000), kExp25k, kGoldenTol));
    for (int k = 1; k <= 5; ++k) {
        CAPTURE(k);
        CHECK(rel_close(lr_at(exp, 10000 * k), kExpAt[k], kGoldenTol));
    }
}

TEST_CASE("step zero is zero for every policy") {
    for (const auto& c : defaults::all()) CHECK(lr_at(c, 0) == 0.0);
}

TEST_CASE("negative step is rejected") {
    CHECK_THROWS_AS(lr_at(defaults::inverse_sqrt(), -1), ConfigError);
}

TEST_CASE("invalid configs name the violated field") {
    CHECK(config_error_field({0.0, 100, InverseSqrtLinear{}}) == "peak_lr");
    CHECK(config_error_field({-1.0, 100, InverseSqrtLinear{}}) == "peak_lr");
    CHECK(config_error_field({1e-3, 0, InverseSqrtLinear{}}) == "warmup_steps");
    CHECK(config_error_field({1e-3, 100, Polynomial{0.0}}) == "policy.alpha");
    CHECK(config_error_field({1e-3, 100, Exponential{-2.0}}) == "policy.alpha");
    CHECK(config_error_field({1e-3, 100, PiecewiseLinear{1e-3, 50}}) == "policy.intermediate_lr");
    CHECK(config_error_field({1e-3, 100, PiecewiseLinear{1e-4, 100}}) == "policy.intermediate_steps");
    CHECK(config_error_field({1e-3, 100, PiecewiseLinear{1e-4, 0}}) == "policy.intermediate_steps");
    CHECK_THROWS_AS(lr_at({1e-3, 100, Polynomial{0.0}}, 5), ConfigError);
}

TEST_CASE("schedule_table") {
    SUBCASE("single point") {
        const auto t = schedule_table(defaults::exponential(), 0, 1);
        REQUIRE(t.rows.size() == 1);
        CHECK(t.rows[0] == ScheduleRow{0, 0.0});
    }
    SUBCASE("linear midpoint and peak") {
        const auto t = schedule_table(defaults::inverse_sqrt(), 50000, 25000);
        REQUIRE(t.rows.size() == 3);
        CHECK(t.rows[0].step == 0);
        CHECK(t.rows[0].lr == 0.0);
        CHECK(t.rows[1].step == 25000);
        CHECK(rel_close(t.rows[1].lr, 1e-4, kGoldenTol));
        CHECK(t.rows[2].step == 50000);
        CHECK(rel_close(t.rows[2].lr, 2e-4, kGoldenTol));
    }
    SUBCASE("exponential rows match independent values") {
        const auto t = schedule_table(defaults::exponential(), 50000, 10000);
        REQUIRE(t.rows.size() == 6);
        for (std::size_t k = 0; k < t.rows.size(); ++k) {
            CHECK(t.rows[k].step == static_cast<std::int64_t>(10000 * k));
            CHECK(rel_close(t.rows[k].lr, kExpAt[k], kGoldenTol));
        }
    }
    SUBCASE("rows strictly increasing and equal to lr_at") {
        const auto c = defaults::piecewise_linear();
        const auto t = schedule_table(c, 123457, 977);
        CHECK(t.rows.back().step <= 123457);
        CHECK(t.rows.back().step + 977 > 123457);
        for (std::size_t k = 0; k < t.rows.size(); ++k) {
            if (k > 0) CHECK(t.rows[k].step > t.rows[k - 1].step);
            CHECK(t.rows[k].lr == lr_at(c, t.rows[k].step));
        }
    }
    SUBCASE("zero stride") {
        try {
            schedule_table(defaults::inverse_sqrt(), 100, 0);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field() == "stride");
        }
    }
    SUBCASE("huge stride does not overflow") {
        const auto t = schedule_table(defaults::inverse_sqrt(), INT64_MAX - 1, INT64_MAX / 2);
        CHECK(t.rows.size() == 3);
    }
}

TEST_CASE("property: warmup nondecreasing, decay nonincreasing, bounded, continuous at peak") {
    Gen gen(101);
    for (int trial = 0; trial < 300; ++trial) {
        const auto c = gen.schedule_config();
        CAPTURE(serialize(c));
        const auto w = c.warmup_steps;
        CHECK(lr_at(c, w) == c.peak_lr);

        std::vector<std::int64_t> steps{0, 1, w - 1, w, w + 1, 10 * w};
        for (int k = 0; k < 60; ++k) steps.push_back(gen.integer(0, 3 * w));
        if (const auto* p = std::get_if<PiecewiseLinear>(&c.policy)) {
            steps.insert(steps.end(), {p->intermediate_steps - 1, p->intermediate_steps, p->intermediate_steps + 1});
        }
        std::sort(steps.begin(), steps.end());
        steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
        steps.erase(std::remove_if(steps.begin(), steps.end(), [](auto s) { return s < 0; }), steps.end());

        double prev = -1.0;
        std::int64_t prev_step = -1;
        for (auto s : steps) {
            const double lr = lr_at(c, s);
            CHECK(lr >= 0.0);
            CHECK(lr <= c.peak_lr);
            if (prev_step >= 0 && s <= w) CHECK(prev <= lr);
            if (prev_step >= w) CHECK(prev >= lr);
            prev = lr;
            prev_step = s;
        }
    }
}

TEST_CASE("property: every policy shares the decay branch bit-for-bit") {
    Gen gen(202);
    for (int trial = 0; trial < 200; ++trial) {
        const double eta = gen.log_uniform(1e-6, 1e-1);
        const auto w = gen.integer(2, 100000);
        const ScheduleConfig a{eta, w, gen.policy(eta, w)};
        const ScheduleConfig b{eta, w, gen.policy(eta, w)};
        for (int k = 0; k < 20; ++k) {
            const auto s = gen.integer(w, 50 * w);
            CHECK(lr_at(a, s) == lr_at(b, s));
        }
    }
}

TEST_CASE("polynomial with alpha 1 is the linear warmup") {
    const ScheduleConfig lin = defaults::inverse_sqrt(3e-4, 4000);
    const ScheduleConfig poly{3e-4, 4000, Polynomial{1.0}};
    for (std::int64_t s = 0; s <= 12000; ++s) {
        if (lr_at(lin, s) != lr_at(poly, s)) {
            FAIL("mismatch at step " << s);
        }
    }
}

TEST_CASE("exponential with tiny alpha approaches the linear warmup") {
    const ScheduleConfig lin = defaults::inverse_sqrt();
    const ScheduleConfig exp{2e-4, 50000, Exponential{1e-6}};
    for (std::int64_t s = 1; s <= 50000; s += 7) {
        if (!rel_close(lr_at(exp, s), lr_at(lin, s), 1e-5)) {
            FAIL("step " << s << ": " << lr_at(exp, s) << " vs " << lr_at(lin, s));
        }
    }
}

TEST_CASE("piecewise equals the max of both ramps when the first ramp is the shallower one") {
    auto max_form = [](const ScheduleConfig& c, std::int64_t i) {
        const auto& p = std::get<PiecewiseLinear>(c.policy);
        const double eta = c.peak_lr;
        const double w = static_cast<double>(c.warmup_steps);
        const double w1 = static_cast<double>(p.intermediate_steps);
        const double x = static_cast<double>(i);
        return std::max(p.intermediate_lr * x / w1,
                        p.intermediate_lr + (eta - p.intermediate_lr) * (x - w1) / (w - w1));
    };
    const auto c = defaults::piecewise_linear();
    for (std::int64_t s = 1; s < c.warmup_steps; ++s) {
        if (!rel_close(lr_at(c, s), max_form(c, s), 1e-12)) FAIL("step " << s);
    }

    // A steep first ramp: the two-phase form still starts at 0 and stays under the peak.
    const ScheduleConfig steep{1e-3, 1000, PiecewiseLinear{9e-4, 10}};
    CHECK(lr_at(steep, 0) == 0.0);
    CHECK(rel_close(lr_at(steep, 10), 9e-4, 1e-15));
    CHECK(rel_close(lr_at(steep, 5), 4.5e-4, 1e-15));
    for (std::int64_t s = 0; s <= 2000; ++s) CHECK(lr_at(steep, s) <= 1e-3);
}

TEST_CASE("purity under concurrent evaluation") {
    const auto configs = defaults::all();
    std::vector<double> serial;
    for (const auto& c : configs)
        for (std::int64_t s = 0; s < 20000; s += 3) serial.push_back(lr_at(c, s));

    std::vector<std::vector<double>> results(4);
    {
        std::vector<std::jthread> threads;
        for (int t = 0; t < 4; ++t) {
            threads.emplace_back([&, t] {
                for (auto it = configs.rbegin(); it != configs.rend(); ++it)
                    for (std::int64_t s = 19998; s >= 0; s -= 3) results[t].push_back(lr_at(*it, s));
                std::reverse(results[t].begin(), results[t].end());
            });
        }
    }
    for (const auto& r : results) CHECK(r == serial);
}

TEST_CASE("crossovers") {
    const StepRange warmup{1, 50000};
    SUBCASE("identical schedules") {
        for (const auto& c : defaults::all()) CHECK(crossovers(c, c, warmup).empty());
    }
    SUBCASE("exponential vs polynomial") {
        const auto found = crossovers(defaults::exponential(), defaults::polynomial(), warmup);
        REQUIRE(found.size() == 1);
        CHECK(found[0] == Crossover{14624, Lead::kFirst, Lead::kSecond});
        CHECK(lr_at(defaults::exponential(), 14623) > lr_at(defaults::polynomial(), 14623));
        CHECK(lr_at(defaults::exponential(), 14624) < lr_at(defaults::polynomial(), 14624));
    }
    SUBCASE("argument order mirrors leads") {
        const auto found = crossovers(defaults::polynomial(), defaults::exponential(), warmup);
        REQUIRE(found.size() == 1);
        CHECK(found[0] == Crossover{14624, Lead::kSecond, Lead::kFirst});
    }
    SUBCASE("exponential vs piecewise crosses late in warmup") {
        const auto found = crossovers(defaults::exponential(), defaults::piecewise_linear(), warmup);
        REQUIRE(found.size() == 1);
        CHECK(found[0] == Crossover{45267, Lead::kFirst, Lead::kSecond});
        CHECK(found[0].step >= 45000);
    }
    SUBCASE("polynomial overtakes piecewise early") {
        const auto found = crossovers(defaults::polynomial(), defaults::piecewise_linear(), warmup);
        REQUIRE(found.size() == 1);
        CHECK(found[0] == Crossover{2001, Lead::kSecond, Lead::kFirst});
    }
    SUBCASE("exponential never crosses the linear warmup") {
        CHECK(crossovers(defaults::exponential(), defaults::inverse_sqrt(), warmup).empty());
        CHECK(crossovers(defaults::exponential(), defaults::inverse_sqrt(), {0, 250000}).empty());
    }
    SUBCASE("decay region has no crossovers") {
        CHECK(crossovers(defaults::exponential(), defaults::polynomial(), {50000, 60000}).empty());
    }
    SUBCASE("mismatched horizon") {
        CHECK_THROWS_AS(crossovers(defaults::exponential(), defaults::polynomial(3e-4), warmup), ComparisonError);
        CHECK_THROWS_AS(crossovers(defaults::exponential(), defaults::polynomial(2e-4, 40000), warmup),
                        ComparisonError);
    }
    SUBCASE("bad range") {
        CHECK_THROWS_AS(crossovers(defaults::exponential(), defaults::polynomial(), {10, 5}), ConfigError);
    }
}

TEST_CASE("serialization round trip") {
    for (const auto& c : defaults::all()) CHECK(deserialize(serialize(c)) == c);
    Gen gen(303);
    for (int trial = 0; trial < 500; ++trial) {
        const auto c = gen.schedule_config();
        CHECK(deserialize(serialize(c)) == c);
    }
}

TEST_CASE("deserialization errors carry field paths") {
    CHECK(parse_error_field(R"({"peak_lr":2e-4,"warmup_steps":100,
        "policy":{"type":"piecewise_linear","intermediate_lr":3e-4,"intermediate_steps":50}})") ==
          "policy.intermediate_lr");
    CHECK(parse_error_field(R"({"peak_lr":2e-4,"warmup_steps":100,"policy":{"type":"polynomial","alpha":0}})") ==
          "policy.alpha");
    CHECK(parse_error_field(R"({"peak_lr":2e-4,"warmup_steps":100,"policy":{"type":"cosine"}})") == "policy.type");
    CHECK(parse_error_field(R"({"peak_lr":2e-4,"policy":{"type":"inverse_sqrt"}})") == "warmup_steps");
    CHECK(parse_error_field(R"({"peak_lr":"big","warmup_steps":10,"policy":{"type":"inverse_sqrt"}})") == "peak_lr");
    CHECK(parse_error_field(R"({"peak_lr":2e-4,"warmup_steps":10.5,"policy":{"type":"inverse_sqrt"}})") ==
          "warmup_steps");
    CHECK(parse_error_field(R"({"peak_lr":2e-4,"warmup_steps":10,"policy":{"type":"exponential"}})") ==
          "policy.alpha");
    CHECK(parse_error_field("{not json") == "<root>");
    CHECK(parse_error_field("[1,2]") == "<root>");
}

TEST_CASE("csv export round-trips exactly") {
    const auto t = schedule_table(defaults::exponential(), 60000, 1234);
    std::ostringstream out;
    write_csv(out, t);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,lr");
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        const auto step = std::stoll(line.substr(0, comma));
        const double lr = std::strtod(line.c_str() + comma + 1, nullptr);
        CHECK(step == t.rows[n].step);
        CHECK(lr == t.rows[n].lr);
        ++n;
    }
    CHECK(n == t.rows.size());
}

TEST_CASE("overlay csv has one column per schedule") {
    const auto configs = defaults::all();
    const std::vector<std::string> names{"a", "b", "c", "d"};
    std::ostringstream out;
    write_overlay_csv(out, configs, names, 250000, 1000);
    std::istringstream in(out.str());
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    CHECK(line == "step,a,b,c,d");
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
        ++rows;
    }
    CHECK(rows == 251);
    CHECK_THROWS_AS(write_overlay_csv(out, configs, std::vector<std::string>{"x"}, 10, 1), ContractError);
}

TEST_CASE("format_real") {
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(format_real(2e-4) == "0.00020000000000000001");
    CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_real(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_real(std::numeric_limits<double>::quiet_NaN()) == "nan");
}
