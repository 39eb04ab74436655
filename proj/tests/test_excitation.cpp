#include "ibrid/excitation.hpp"

#include "ibrid/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace ibrid;

namespace {

ExcitationSpec quick_spec(std::uint64_t seed) {
    ExcitationSpec s;
    s.duration = 20.0;
    s.sample_time = 1e-3;
    s.levels = 5;
    s.min_value = 0.9;
    s.max_value = 1.1;
    s.min_hold = 0.05;
    s.max_hold = 0.12;
    s.settle_time = 0.5;
    s.seed = seed;
    return s;
}

// piecewise-constant segment values after the settle prefix
std::vector<double> segment_values(const TimeSeries& ts, double settle_time) {
    const auto& v = ts.channel(std::size_t{0});
    const auto start = static_cast<std::size_t>(settle_time / ts.sample_time());
    std::vector<double> segs{v[start]};
    for (std::size_t k = start + 1; k < v.size(); ++k)
        if (v[k] != v[k - 1]) segs.push_back(v[k]);
    return segs;
}

} // namespace

TEST_SUITE("excitation") {

TEST_CASE("samples stay inside bounds and settle at the nominal") {
    const ExcitationSpec s = quick_spec(11);
    const TimeSeries ts = generate_aprbs(s);
    const auto& v = ts.channel(std::size_t{0});
    for (double x : v) {
        CHECK(x >= s.min_value);
        CHECK(x <= s.max_value);
    }
    for (std::size_t k = 0; k < 500; ++k) CHECK(v[k] == s.nominal_value());
}

TEST_CASE("same spec and seed give a bit-identical series") {
    const ExcitationSpec s = quick_spec(77);
    const TimeSeries a = generate_aprbs(s);
    const TimeSeries b = generate_aprbs(s);
    REQUIRE(a.length() == b.length());
    for (std::size_t k = 0; k < a.length(); ++k)
        CHECK(a.channel(std::size_t{0})[k] == b.channel(std::size_t{0})[k]);
}

TEST_CASE("three levels over (0.9, 1.1) emit only the equispaced set") {
    ExcitationSpec s = quick_spec(5);
    s.levels = 3;
    const TimeSeries ts = generate_aprbs(s);
    for (double x : ts.channel(std::size_t{0})) {
        const bool member = std::abs(x - 0.9) < 1e-12 || std::abs(x - 1.0) < 1e-12 ||
                            std::abs(x - 1.1) < 1e-12;
        CHECK(member);
    }
}

TEST_CASE("invalid specs are rejected") {
    ExcitationSpec s = quick_spec(1);
    s.levels = 2;
    CHECK_THROWS_AS(generate_aprbs(s), ContractError);
    s = quick_spec(1);
    s.min_value = s.max_value;
    CHECK_THROWS_AS(generate_aprbs(s), ContractError);
    s = quick_spec(1);
    s.duration = s.settle_time + s.min_hold / 2.0;
    CHECK_THROWS_AS(generate_aprbs(s), ContractError);
    s = quick_spec(1);
    s.min_hold = 5.0 * s.sample_time;
    CHECK_THROWS_AS(generate_aprbs(s), ContractError);
}

TEST_CASE("windows with enough segments excite every level") {
    // uniform i.i.d. draws leave a small per-window chance of a missing level,
    // so full coverage is asserted for the record and near-coverage per window;
    // deterministic for the pinned seed
    ExcitationSpec s = quick_spec(19);
    s.duration = 10.0;
    const TimeSeries ts = generate_aprbs(s);
    const auto segs = segment_values(ts, s.settle_time);
    REQUIRE(segs.size() >= static_cast<std::size_t>(3 * s.levels));
    const std::set<double> all(segs.begin(), segs.end());
    CHECK(all.size() == static_cast<std::size_t>(s.levels));

    const std::size_t w = static_cast<std::size_t>(3 * s.levels);
    std::size_t full = 0, windows = 0;
    for (std::size_t start = 0; start + w <= segs.size(); start += w, ++windows) {
        std::set<double> distinct(segs.begin() + static_cast<long>(start),
                                  segs.begin() + static_cast<long>(start + w));
        CHECK(distinct.size() + 1 >= static_cast<std::size_t>(s.levels));
        if (distinct.size() >= static_cast<std::size_t>(s.levels)) ++full;
    }
    CHECK(full * 10 >= windows * 7); // at least 70 % of windows see every level
}

TEST_CASE("adjacent repetition rate matches the uniform draw") {
    // constant hold makes every draw visible at a known sample index, so
    // repeated amplitudes between neighbouring segments are countable exactly
    ExcitationSpec s = quick_spec(23);
    s.duration = 75.5;
    s.min_hold = 0.05;
    s.max_hold = 0.05;
    const TimeSeries ts = generate_aprbs(s);
    const auto& v = ts.channel(std::size_t{0});
    const auto settle = static_cast<std::size_t>(s.settle_time / s.sample_time);
    const auto hold = static_cast<std::size_t>(s.min_hold / s.sample_time);
    std::vector<double> draws;
    for (std::size_t k = settle; k < v.size(); k += hold) draws.push_back(v[k]);
    REQUIRE(draws.size() > 1000);
    std::size_t repeats = 0;
    for (std::size_t j = 1; j < draws.size(); ++j)
        if (draws[j] == draws[j - 1]) ++repeats;
    const double n = static_cast<double>(draws.size() - 1);
    const double p = 1.0 / s.levels;
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(static_cast<double>(repeats) / n - p) <= 3.0 * sigma);
}

TEST_CASE("scenario signals respect channel bounds and stay uncorrelated") {
    ExcitationSpec u = quick_spec(101);
    u.min_value = 0.9;
    u.max_value = 1.1;
    ExcitationSpec f = quick_spec(202);
    f.min_value = 49.5;
    f.max_value = 50.5;
    const TimeSeries ts = build_scenario_signals(u, f, std::nullopt);
    CHECK(ts.channel_count() == 2);
    for (double x : ts.channel("u_ref")) {
        CHECK(x >= 0.9);
        CHECK(x <= 1.1);
    }
    for (double x : ts.channel("f_ref")) {
        CHECK(x >= 49.5);
        CHECK(x <= 50.5);
    }
    // sample cross-correlation of the mean-removed waveforms
    const auto& a = ts.channel("u_ref");
    const auto& b = ts.channel("f_ref");
    double ma = 0, mb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ma += a[k];
        mb += b[k];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double num = 0, da = 0, db = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num += (a[k] - ma) * (b[k] - mb);
        da += (a[k] - ma) * (a[k] - ma);
        db += (b[k] - mb) * (b[k] - mb);
    }
    const std::size_t n_segments = segment_values(ts.select({"u_ref"}), 0.5).size();
    CHECK(n_segments >= 20);
    CHECK(std::abs(num / std::sqrt(da * db)) <= 0.2);
}

TEST_CASE("optional power channel") {
    ExcitationSpec u = quick_spec(1), f = quick_spec(2), p = quick_spec(3);
    p.min_value = 0.1;
    p.max_value = 0.9;
    const TimeSeries with_p = build_scenario_signals(u, f, p);
    CHECK(with_p.channel_count() == 3);
    CHECK(with_p.has_channel("p_load"));
    ExcitationSpec other = quick_spec(4);
    other.duration += 1.0;
    CHECK_THROWS_AS(build_scenario_signals(u, other, std::nullopt), ContractError);
}

} // TEST_SUITE
