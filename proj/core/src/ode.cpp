#include "ibrid/ode.hpp"

#include "ibrid/errors.hpp"

#include <cmath>

namespace ibrid {

namespace {

void check_finite(std::span<const double> v, double t) {
    for (double x : v)
        if (!std::isfinite(x)) throw DivergenceError("ode: non-finite derivative", t);
}

} // namespace

void rk4_step(const OdeRhs& rhs, double t, double h, std::span<double> state) {
    const std::size_t n = state.size();
    thread_local std::vector<double> k1, k2, k3, k4, tmp;
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    tmp.resize(n);

    rhs(t, state, k1);
    check_finite(k1, t);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
    rhs(t + 0.5 * h, tmp, k2);
    check_finite(k2, t);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
    rhs(t + 0.5 * h, tmp, k3);
    check_finite(k3, t);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + h * k3[i];
    rhs(t + h, tmp, k4);
    check_finite(k4, t);
    for (std::size_t i = 0; i < n; ++i)
        state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

std::vector<std::vector<double>> integrate(const OdeRhs& rhs, std::vector<double> state, double t0,
                                           double h, std::size_t n_steps) {
    if (!(h > 0.0)) throw ContractError("integrate: step must be > 0");
    std::vector<std::vector<double>> trajectory;
    trajectory.reserve(n_steps + 1);
    trajectory.push_back(state);
    double t = t0;
    for (std::size_t s = 0; s < n_steps; ++s) {
        rk4_step(rhs, t, h, state);
        t = t0 + static_cast<double>(s + 1) * h;
        trajectory.push_back(state);
    }
    return trajectory;
}

} // namespace ibrid
