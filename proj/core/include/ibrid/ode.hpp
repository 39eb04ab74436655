#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ibrid {

/// Derivative callback: rhs(t, state, dstate_out).
using OdeRhs = std::function<void(double, std::span<const double>, std::span<double>)>;

/// Classical fixed-step RK4. Advances `state` in place by one step of size h.
/// Throws DivergenceError when the rhs produces non-finite derivatives.
void rk4_step(const OdeRhs& rhs, double t, double h, std::span<double> state);

/// Integrates from t0 over n_steps of size h, recording the state after every
/// step (trajectory[0] is the initial state; size n_steps + 1).
std::vector<std::vector<double>> integrate(const OdeRhs& rhs, std::vector<double> state, double t0,
                                           double h, std::size_t n_steps);

} // namespace ibrid
