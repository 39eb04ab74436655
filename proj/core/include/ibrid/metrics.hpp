#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>

namespace ibrid {

/// NRMSE fit in percent: 100 * (1 - ||y - yhat|| / ||y - mean(y)||).
/// 100 is a perfect reproduction; negative values are reported as-is.
/// Throws ContractError when the measured channel is constant.
double nrmse_fit(std::span<const double> measured, std::span<const double> modeled);

/// Akaike's final prediction error for an N x n_y prediction-error matrix:
/// det((1/N) E^T E) * (1 + n_p/N) / (1 - n_p/N). Requires N > n_p.
double fpe(const Eigen::MatrixXd& prediction_errors, std::size_t n_p);

/// Scalar-output convenience overload.
double fpe(std::span<const double> prediction_errors, std::size_t n_p);

enum class DatasetLabel { estimation, validation };

/// Accuracy/complexity figures for one output on one dataset.
struct FitReport {
    double fit_percent = 0.0;
    double fpe_value = 0.0;
    double loss = 0.0;
    std::size_t n_p = 0;
    std::size_t n_samples = 0;
    DatasetLabel dataset = DatasetLabel::estimation;
};

std::string to_string(DatasetLabel label);

} // namespace ibrid
