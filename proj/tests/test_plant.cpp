#include "ibrid/plant.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/ode.hpp"

#include <doctest.h>

#include <cmath>

using namespace ibrid;

namespace {

TimeSeries constant_excitation(double duration, double dt = 1e-3) {
    const auto n = static_cast<std::size_t>(duration / dt);
    return TimeSeries(dt, {{"u_ref", std::vector<double>(n, 1.0)}});
}

} // namespace

TEST_SUITE("plant") {

TEST_CASE("rk4 matches exp decay") {
    std::vector<double> x{1.0};
    const OdeRhs rhs = [](double, std::span<const double> s, std::span<double> d) { d[0] = -s[0]; };
    const auto traj = integrate(rhs, x, 0.0, 1e-3, 1000);
    CHECK(traj.back()[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("rk4 keeps a zero field constant") {
    std::vector<double> x{2.5, -1.0};
    const OdeRhs rhs = [](double, std::span<const double>, std::span<double> d) {
        d[0] = 0.0;
        d[1] = 0.0;
    };
    const auto traj = integrate(rhs, x, 0.0, 1e-2, 100);
    CHECK(traj.back()[0] == 2.5);
    CHECK(traj.back()[1] == -1.0);
}

TEST_CASE("rk4 closes a harmonic-oscillator orbit") {
    const double w = 2.0 * M_PI;
    std::vector<double> x{1.0, 0.0};
    const OdeRhs rhs = [&](double, std::span<const double> s, std::span<double> d) {
        d[0] = s[1];
        d[1] = -w * w * s[0];
    };
    const auto traj = integrate(rhs, x, 0.0, 1e-4, 10000); // exactly one period
    CHECK(std::abs(traj.back()[0] - 1.0) <= 1e-8);
    CHECK(std::abs(traj.back()[1]) <= 1e-8 * w);
}

TEST_CASE("rk4 propagates divergence") {
    std::vector<double> x{1.0};
    const OdeRhs rhs = [](double, std::span<const double>, std::span<double> d) {
        d[0] = std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(rk4_step(rhs, 0.0, 1e-3, x), DivergenceError);
}

TEST_CASE("gfm no-load equilibrium is the setpoint") {
    GfmParams p;
    const TimeSeries out = simulate_gfm({p, constant_excitation(3.0), 2e-4});
    CHECK(std::abs(out.channel("u_d").back() - 1.0) <= 1e-6);
    CHECK(std::abs(out.channel("u_q").back()) <= 1e-6);
    CHECK(std::abs(out.channel("f").back() - 50.0) <= 1e-6);
}

TEST_CASE("gfm active droop equilibrium") {
    GfmParams p;
    p.load_conductance = 0.5; // resistive 0.5 pu at 1 pu voltage
    const TimeSeries out = simulate_gfm({p, constant_excitation(5.0), 2e-4});
    CHECK(std::abs(out.channel("f").back() - 49.9) <= 1e-4);
    CHECK(std::abs(out.channel("u_d").back() - 1.0) <= 1e-4);
}

TEST_CASE("gfm reactive droop equilibrium") {
    GfmParams p;
    p.load_susceptance = 0.4 / (0.98 * 0.98); // draws Q = 0.4 pu at the droop equilibrium
    const TimeSeries out = simulate_gfm({p, constant_excitation(5.0), 2e-4});
    const double ud = out.channel("u_d").back(), uq = out.channel("u_q").back();
    CHECK(std::abs(std::hypot(ud, uq) - 0.98) <= 1e-4);
    CHECK(std::abs(out.channel("f").back() - 50.0) <= 1e-4);
}

TEST_CASE("gfm droop law holds across the load range") {
    for (double g = 0.1; g <= 1.01; g += 0.3) {
        GfmParams p;
        p.load_conductance = g;
        const TimeSeries out = simulate_gfm({p, constant_excitation(5.0), 2e-4});
        const double u = out.channel("u_d").back();
        const double expected_p = g * u * u;
        CHECK(std::abs(out.channel("f").back() - (50.0 - p.droop_p * expected_p)) <= 1e-3);
    }
}

TEST_CASE("gfm emits abc waveforms consistent with its dq channels") {
    GfmParams p;
    p.load_conductance = 0.3;
    const TimeSeries out = simulate_gfm({p, constant_excitation(1.0), 2e-4});
    // |u_abc| envelope equals |u_dq| for a balanced set
    const std::size_t k = out.length() - 1;
    const double ua = out.channel("u_a")[k], ub = out.channel("u_b")[k], uc = out.channel("u_c")[k];
    const double mag_abc = std::sqrt((2.0 / 3.0) * (ua * ua + ub * ub + uc * uc));
    const double mag_dq = std::hypot(out.channel("u_d")[k], out.channel("u_q")[k]);
    CHECK(mag_abc == doctest::Approx(mag_dq).epsilon(1e-9));
}

TEST_CASE("gfl tracks its current references") {
    GflParams p;
    const TimeSeries out = simulate_gfl({p, constant_excitation(4.0), 2e-4});
    CHECK(std::abs(out.channel("i_d").back() - 0.5) <= 1e-4);
    CHECK(std::abs(out.channel("i_q").back()) <= 1e-4);
    CHECK(std::abs(out.channel("f").back() - 50.0) <= 1e-4);
}

TEST_CASE("gfl pll follows a grid frequency step") {
    GflParams p;
    const auto n = static_cast<std::size_t>(4.0 / 1e-3);
    std::vector<double> fs(n, 50.0);
    for (std::size_t k = n / 2; k < n; ++k) fs[k] = 50.5;
    const TimeSeries out = simulate_gfl({p, TimeSeries(1e-3, {{"f_src", fs}}), 2e-4});
    CHECK(std::abs(out.channel("f").back() - 50.5) <= 1e-3);
}

TEST_CASE("gfl with zero references rides at the grid voltage") {
    GflParams p;
    p.id_ref = 0.0;
    p.iq_ref = 0.0;
    const TimeSeries out = simulate_gfl({p, constant_excitation(4.0), 2e-4});
    CHECK(std::abs(out.channel("i_d").back()) <= 1e-6);
    CHECK(std::abs(out.channel("i_q").back()) <= 1e-6);
    CHECK(std::abs(out.channel("u_d").back() - 1.0) <= 1e-5);
    CHECK(std::abs(out.channel("u_q").back()) <= 1e-6);
}

TEST_CASE("gfl current tracking across the reference range") {
    for (double ref = -1.0; ref <= 1.01; ref += 0.5) {
        GflParams p;
        p.id_ref = ref;
        p.iq_ref = -0.2;
        const TimeSeries out = simulate_gfl({p, constant_excitation(4.0), 2e-4});
        CHECK(std::abs(out.channel("i_d").back() - ref) <= 1e-3);
        CHECK(std::abs(out.channel("i_q").back() + 0.2) <= 1e-3);
    }
}

TEST_CASE("halving the solver step leaves outputs unchanged to 1e-6") {
    GfmParams p;
    p.with_source = true;
    const auto n = static_cast<std::size_t>(2.0 / 1e-3);
    std::vector<double> vs(n, 1.0);
    for (std::size_t k = n / 2; k < n; ++k) vs[k] = 0.97;
    const TimeSeries exc(1e-3, {{"v_src", vs}});
    const TimeSeries a = simulate_gfm({p, exc, 5e-5});
    const TimeSeries b = simulate_gfm({p, exc, 2.5e-5});
    for (const char* ch : {"u_d", "u_q", "f", "i_d", "i_q"}) {
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            worst = std::max(worst, std::abs(a.channel(ch)[k] - b.channel(ch)[k]));
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("simulations are bit-deterministic") {
    GfmParams p;
    p.with_source = true;
    const TimeSeries exc = constant_excitation(1.0);
    const TimeSeries a = simulate_gfm({p, exc, 2e-4});
    const TimeSeries b = simulate_gfm({p, exc, 2e-4});
    for (std::size_t c = 0; c < a.channel_count(); ++c)
        for (std::size_t k = 0; k < a.length(); ++k)
            CHECK(a.channel(c)[k] == b.channel(c)[k]);
}

TEST_CASE("state divergence raises with the first divergent time") {
    GfmParams p;
    p.kp_voltage = 40.0; // voltage loop far beyond the current loop: unstable
    p.ki_voltage = 2000.0;
    CHECK_THROWS_AS(simulate_gfm({p, constant_excitation(4.0), 2e-4}), DivergenceError);
}

TEST_CASE("pll loss of lock is reported") {
    GflParams p;
    p.kp_pll = 2.0; // far too slow to re-lock after a large disturbance
    p.ki_pll = 1.0;
    const auto n = static_cast<std::size_t>(6.0 / 1e-3);
    std::vector<double> fs(n, 50.0);
    for (std::size_t k = n / 4; k < n; ++k) fs[k] = 51.5;
    CHECK_THROWS_AS(simulate_gfl({p, TimeSeries(1e-3, {{"f_src", fs}}), 2e-4}),
                    PllLockError);
}

TEST_CASE("parameter validation") {
    GfmParams p;
    p.droop_p = 0.0;
    CHECK_THROWS_AS(p.validate(), ContractError);
    GflParams q;
    q.ki_pll = 0.0;
    CHECK_THROWS_AS(q.validate(), ContractError);
    GfmParams r;
    PlantScenario sc{r, constant_excitation(0.1), 2e-3}; // step > sample_time
    CHECK_THROWS_AS(sc.validate(), ContractError);
}

} // TEST_SUITE
