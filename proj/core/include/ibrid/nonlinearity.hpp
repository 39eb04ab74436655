#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ibrid {

enum class NlFamily { identity, piecewise_linear, polynomial, sigmoid_network, wavelet_network };

std::string to_string(NlFamily family);
NlFamily nl_family_from_string(const std::string& name);

/// One unit of a sigmoid or wavelet network: amplitude * basis(dilation * (x - translation)).
struct NlUnit {
    double amplitude = 0.0;
    double dilation = 1.0;
    double translation = 0.0;

    bool operator==(const NlUnit&) const = default;
};

/// Memoryless scalar nonlinearity: the f and h blocks of the HW structure.
///
/// Variants:
///  - identity: y = x, no parameters
///  - piecewise_linear: interpolation through (breakpoint, value) pairs,
///    extrapolated with the end segments' slopes; parameters are the
///    breakpoints followed by the values
///  - polynomial: y = c0 + c1 x + ... + cd x^d
///  - sigmoid_network: y = offset + slope*x + sum a_j * logistic(b_j (x - c_j))
///  - wavelet_network: y = offset + slope*x + sum a_j * psi(b_j (x - c_j)),
///    psi(r) = (1 - r^2) exp(-r^2 / 2)
///
/// The map is differentiable in its parameters wherever it is evaluated;
/// piecewise-linear breakpoint sensitivities are the one non-smooth exception
/// and are flagged through analytic_parameter_mask() so the estimator can fall
/// back to finite differences for those columns.
class Nonlinearity {
public:
    Nonlinearity() : family_(NlFamily::identity) {}

    static Nonlinearity identity();
    static Nonlinearity piecewise_linear(std::vector<double> breakpoints, std::vector<double> values);
    static Nonlinearity polynomial(std::vector<double> coefficients);
    static Nonlinearity sigmoid_network(std::vector<NlUnit> units, double offset, double linear_slope);
    static Nonlinearity wavelet_network(std::vector<NlUnit> units, double offset, double linear_slope);

    NlFamily family() const { return family_; }

    double operator()(double x) const;

    /// d(output)/d(input) at x.
    double input_derivative(double x) const;

    std::size_t parameter_count() const;
    void pack_parameters(std::span<double> out) const;
    void set_parameters(std::span<const double> params); ///< throws on invalid (e.g. unsorted breakpoints)

    /// true for parameters with closed-form gradients; false -> finite differences.
    std::vector<bool> analytic_parameter_mask() const;

    /// d(output)/d(parameter) at x for the analytic parameters (others left 0).
    void parameter_gradient(double x, std::span<double> grad) const;

    // variant accessors (throw on family mismatch)
    const std::vector<double>& breakpoints() const;
    const std::vector<double>& values() const;
    const std::vector<double>& coefficients() const;
    const std::vector<NlUnit>& units() const;
    double offset() const { return offset_; }
    double linear_slope() const { return slope_; }

    bool operator==(const Nonlinearity&) const = default;

private:
    NlFamily family_;
    std::vector<double> xs_;     // pwl breakpoints
    std::vector<double> ys_;     // pwl values
    std::vector<double> coeffs_; // polynomial
    std::vector<NlUnit> units_;  // sigmoid / wavelet
    double offset_ = 0.0;
    double slope_ = 0.0;
};

} // namespace ibrid
