#pragma once

#include "ibrid/hwmodel.hpp"
#include "ibrid/timeseries.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ibrid {

enum class Method {
    subspace_gauss_newton,
    adaptive_subspace_gauss_newton,
    levenberg_marquardt,
    steepest_descent
};

enum class Termination { gradient, loss_stalled, max_iter, numerical_failure };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
std::string to_string(Termination t);

struct EstimationConfig {
    Eigen::MatrixXd weight = Eigen::MatrixXd::Identity(1, 1); ///< W, positive semidefinite
    int max_iterations = 200;
    double gradient_tolerance = 1e-8;        ///< on the infinity norm of (2/N) J^T W e
    double loss_improvement_tolerance = 1e-10; ///< relative, over stall_window iterations
    int stall_window = 5;
    Method method = Method::levenberg_marquardt;
    double lm_lambda0 = 1e-3;
    double lm_increase = 10.0;
    double lm_decrease = 0.1;
    int transient_discard = 50; ///< effective discard is max(this, n_f)
    double subspace_cutoff = 1e-8; ///< keep singular values >= cutoff * sigma_max

    void validate() const;
};

struct FitResult {
    HWModelMiso model;
    double final_loss = 0.0;
    int iterations = 0;
    Termination termination = Termination::max_iter;
    std::vector<double> loss_trace; ///< non-increasing over accepted steps
};

/// Prediction errors e[k] = measured[k] - simulated[k] with the transient
/// prefix (max(transient_discard, n_f) samples) removed.
std::vector<double> prediction_errors(const HWModelMiso& model, const TimeSeries& data,
                                      int transient_discard);

/// V(theta) = (1/N) sum e^T W e over retained samples. Simulation divergence
/// is reported as +infinity (the candidate is rejected, not crashed).
double loss(const HWModelMiso& model, const TimeSeries& data, const EstimationConfig& config);

struct JacobianResult {
    Eigen::MatrixXd jacobian; ///< d e / d theta, N_retained x n_p
    Eigen::VectorXd error;    ///< e over retained samples
};

/// Analytic sensitivities where closed form exists (polynomial, sigmoid,
/// wavelet, linear coefficients); central finite differences for
/// piecewise-linear breakpoints. Throws NumericalError on non-finite entries.
JacobianResult jacobian(const HWModelMiso& model, const TimeSeries& data,
                        const EstimationConfig& config);

/// Iterative weighted least squares with the selected method. Only
/// loss-decreasing steps are accepted.
FitResult estimate(const HWModelMiso& initial, const TimeSeries& data,
                   const EstimationConfig& config);

/// One grid point of the structure search.
struct StructureSpec {
    NlFamily family = NlFamily::polynomial;
    int nl_degree = 2;         ///< polynomial degree / breakpoint count / unit count
    int numerator_order = 1;   ///< n_b
    int denominator_order = 1; ///< n_f
    int delay = 0;             ///< n_k
    std::vector<std::string> input_names;
    std::string output_name;

    std::size_t parameter_count() const; ///< structural n_p
};

/// Builds the starting model: linear block from an ARX least-squares fit with
/// identity nonlinearities (unit gain on rank deficiency), nonlinearities
/// initialized to act as the identity over the observed data range, output
/// normalization recorded from the simulated linear response.
HWModelMiso initialize(const StructureSpec& spec, const TimeSeries& data);

namespace detail {
/// Subspace Gauss-Newton step restricted to singular values >= cutoff * sigma_max
/// (optionally to the leading max_rank of them).
Eigen::VectorXd gauss_newton_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& err, double w,
                                  double cutoff, int max_rank = -1, int* rank_out = nullptr);
/// Levenberg-Marquardt step: (J^T W J + lambda I) d = -J^T W e.
Eigen::VectorXd lm_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& err, double w,
                        double lambda);
} // namespace detail

} // namespace ibrid
