#include "ibrid/timeseries.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace ibrid;
namespace fs = std::filesystem;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

fs::path tmp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "ibrid_tests";
    fs::create_directories(dir);
    return dir / name;
}
} // namespace

TEST_SUITE("timeseries") {

TEST_CASE("construction invariants") {
    CHECK_THROWS_AS(TimeSeries(0.0, {{"a", {1.0}}}), ContractError);
    CHECK_THROWS_AS(TimeSeries(1e-3, {{"a", {1.0}}, {"a", {2.0}}}), ContractError);
    CHECK_THROWS_AS(TimeSeries(1e-3, {{"", {1.0}}}), ContractError);
    CHECK_THROWS_AS(TimeSeries(1e-3, {{"a", {1.0, 2.0}}, {"b", {1.0}}}), ContractError);
    CHECK_THROWS_AS(TimeSeries(1e-3, {{"a", {std::nan("")}}}), ContractError);
    const TimeSeries ok(1e-3, {{"a", {1.0, 2.0}}, {"b", {3.0, 4.0}}});
    CHECK(ok.length() == 2);
    CHECK(ok.channel("b")[1] == 4.0);
    CHECK_THROWS_AS(ok.channel("c"), ContractError);
}

TEST_CASE("angle from constant 50 Hz over one cycle") {
    const std::vector<double> f(21, 50.0);
    const auto theta = angle_from_frequency(f, 1e-3, 0.0);
    CHECK(theta[0] == 0.0);
    CHECK(theta[20] == doctest::Approx(kTwoPi).epsilon(1e-12));
}

TEST_CASE("angle from zero frequency stays at theta0") {
    const std::vector<double> f(100, 0.0);
    const auto theta = angle_from_frequency(f, 1e-3, 1.25);
    for (double th : theta) CHECK(th == 1.25);
}

TEST_CASE("angle from 49.5 Hz after one second") {
    const std::vector<double> f(1001, 49.5);
    const auto theta = angle_from_frequency(f, 1e-3, 0.0);
    CHECK(theta[1000] == doctest::Approx(kTwoPi * 49.5).epsilon(1e-12));
}

TEST_CASE("angle rejects non-finite input") {
    std::vector<double> f(10, 50.0);
    f[5] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(angle_from_frequency(f, 1e-3, 0.0), ContractError);
}

TEST_CASE("angle is linear in frequency") {
    Rng rng(7);
    std::vector<double> f(200);
    for (auto& v : f) v = rng.uniform(49.0, 51.0);
    std::vector<double> f2(200);
    const double alpha = 1.7;
    for (std::size_t k = 0; k < f.size(); ++k) f2[k] = alpha * f[k];
    const double theta0 = 0.4;
    const auto t1 = angle_from_frequency(f, 1e-3, theta0);
    const auto t2 = angle_from_frequency(f2, 1e-3, theta0);
    for (std::size_t k = 0; k < f.size(); ++k)
        CHECK(t2[k] - theta0 == doctest::Approx(alpha * (t1[k] - theta0)).epsilon(1e-10));
}

TEST_CASE("abc_to_dq alignment and zero cases") {
    const std::vector<double> f(50, 50.0);
    const auto theta = angle_from_frequency(f, 1e-3, 0.3);
    std::vector<double> a(50), b(50), c(50), zero(50, 0.0);
    for (std::size_t k = 0; k < 50; ++k) {
        a[k] = std::cos(theta[k]);
        b[k] = std::cos(theta[k] - kTwoPi / 3.0);
        c[k] = std::cos(theta[k] + kTwoPi / 3.0);
    }
    const DqPair dq = abc_to_dq(a, b, c, theta);
    for (std::size_t k = 0; k < 50; ++k) {
        CHECK(dq.d[k] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(dq.q[k]) < 1e-12);
    }
    const DqPair z = abc_to_dq(zero, zero, zero, theta);
    for (std::size_t k = 0; k < 50; ++k) {
        CHECK(z.d[k] == 0.0);
        CHECK(z.q[k] == 0.0);
    }
}

TEST_CASE("abc_to_dq quarter-cycle lag lands on the negative q axis") {
    const std::vector<double> f(50, 50.0);
    const auto theta = angle_from_frequency(f, 1e-3, 0.0);
    std::vector<double> a(50), b(50), c(50);
    for (std::size_t k = 0; k < 50; ++k) {
        a[k] = std::cos(theta[k] - kTwoPi / 4.0);
        b[k] = std::cos(theta[k] - kTwoPi / 4.0 - kTwoPi / 3.0);
        c[k] = std::cos(theta[k] - kTwoPi / 4.0 + kTwoPi / 3.0);
    }
    const DqPair dq = abc_to_dq(a, b, c, theta);
    for (std::size_t k = 0; k < 50; ++k) {
        CHECK(std::abs(dq.d[k]) < 1e-12);
        CHECK(dq.q[k] == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("dq_to_abc inverse cases") {
    const std::vector<double> f(40, 50.0);
    const auto theta = angle_from_frequency(f, 1e-3, 0.0);
    const std::vector<double> d(40, 1.0), q(40, 0.0);
    const AbcTriple abc = dq_to_abc(d, q, theta);
    for (std::size_t k = 0; k < 40; ++k)
        CHECK(abc.a[k] == doctest::Approx(std::cos(theta[k])).epsilon(1e-12));

    const std::vector<double> d2(40, 0.0), q2(40, -1.0);
    const AbcTriple abc2 = dq_to_abc(d2, q2, theta);
    for (std::size_t k = 0; k < 40; ++k)
        CHECK(abc2.a[k] == doctest::Approx(std::cos(theta[k] - kTwoPi / 4.0)).epsilon(1e-12));
}

TEST_CASE("round trip on random balanced signals") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 64;
        std::vector<double> f(n), d(n), q(n);
        for (std::size_t k = 0; k < n; ++k) {
            f[k] = rng.uniform(45.0, 55.0);
            d[k] = rng.uniform(-2.0, 2.0);
            q[k] = rng.uniform(-2.0, 2.0);
        }
        const auto theta = angle_from_frequency(f, 1e-3, rng.uniform(0.0, 6.28));
        const AbcTriple abc = dq_to_abc(d, q, theta);
        const DqPair back = abc_to_dq(abc.a, abc.b, abc.c, theta);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(std::abs(back.d[k] - d[k]) <= 1e-12);
            CHECK(std::abs(back.q[k] - q[k]) <= 1e-12);
        }
    }
}

TEST_CASE("matched-frequency sinusoid gives constant dq") {
    const std::size_t n = 2000;
    std::vector<double> f(n, 48.7);
    const auto theta = angle_from_frequency(f, 1e-3, 0.9);
    std::vector<double> a(n), b(n), c(n);
    const double mag = 1.3, phase = 0.77;
    for (std::size_t k = 0; k < n; ++k) {
        a[k] = mag * std::cos(theta[k] + phase);
        b[k] = mag * std::cos(theta[k] + phase - kTwoPi / 3.0);
        c[k] = mag * std::cos(theta[k] + phase + kTwoPi / 3.0);
    }
    const DqPair dq = abc_to_dq(a, b, c, theta);
    for (std::size_t k = 1; k < n; ++k) {
        CHECK(std::abs(dq.d[k] - dq.d[0]) <= 1e-9);
        CHECK(std::abs(dq.q[k] - dq.q[0]) <= 1e-9);
    }
}

TEST_CASE("length mismatch rejected") {
    const std::vector<double> x(10, 0.0), y(9, 0.0);
    CHECK_THROWS_AS(abc_to_dq(x, x, x, y), ContractError);
    CHECK_THROWS_AS(dq_to_abc(x, y, x), ContractError);
}

TEST_CASE("csv round trip preserves the series") {
    Rng rng(3);
    std::vector<TimeSeries::Channel> chans;
    for (const char* name : {"i_d", "i_q", "u_d"}) {
        std::vector<double> v(100);
        for (auto& x : v) x = rng.uniform(-2.0, 2.0);
        chans.push_back({name, std::move(v)});
    }
    const TimeSeries original(5e-3, std::move(chans));
    const fs::path p = tmp_file("roundtrip.csv");
    write_csv(original, p);
    const TimeSeries back = read_csv(p);
    REQUIRE(back.length() == original.length());
    CHECK(back.sample_time() == doctest::Approx(original.sample_time()).epsilon(1e-15));
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(back.name(c) == original.name(c));
        for (std::size_t k = 0; k < 100; ++k)
            CHECK(back.channel(c)[k] == original.channel(c)[k]); // bit-exact
    }
}

TEST_CASE("csv rejects ragged rows naming the line") {
    const fs::path p = tmp_file("ragged.csv");
    std::ofstream(p) << "t,a,b,c\n0,1,2,3\n0.001,1,2\n";
    try {
        read_csv(p);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("csv rejects non-numeric cells") {
    const fs::path p = tmp_file("nonnum.csv");
    std::ofstream(p) << "t,a\n0,1\n0.001,oops\n";
    CHECK_THROWS_AS(read_csv(p), ParseError);
}

TEST_CASE("csv rejects non-uniform time column") {
    const fs::path p = tmp_file("nonuniform.csv");
    std::ofstream(p) << "t,a\n0,1\n0.001,2\n0.0025,3\n";
    CHECK_THROWS_AS(read_csv(p), ParseError);
}

} // TEST_SUITE
