#include "ibrid/metrics.hpp"

#include "ibrid/errors.hpp"

#include <cmath>

namespace ibrid {

double nrmse_fit(std::span<const double> measured, std::span<const double> modeled) {
    if (measured.size() != modeled.size() || measured.empty())
        throw ContractError("nrmse_fit: channel length mismatch");
    double mean = 0.0;
    for (double v : measured) mean += v;
    mean /= static_cast<double>(measured.size());

    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < measured.size(); ++k) {
        const double e = measured[k] - modeled[k];
        const double c = measured[k] - mean;
        num += e * e;
        den += c * c;
    }
    if (den <= 0.0) throw ContractError("nrmse_fit: measured channel is constant, fit undefined");
    return 100.0 * (1.0 - std::sqrt(num) / std::sqrt(den));
}

double fpe(const Eigen::MatrixXd& prediction_errors, std::size_t n_p) {
    const auto n = static_cast<std::size_t>(prediction_errors.rows());
    if (n <= n_p)
        throw ContractError("fpe: need N > n_p (N=" + std::to_string(n) +
                            ", n_p=" + std::to_string(n_p) + ")");
    const Eigen::MatrixXd cov =
        prediction_errors.transpose() * prediction_errors / static_cast<double>(n);
    const double det = cov.determinant();
    const double ratio = static_cast<double>(n_p) / static_cast<double>(n);
    return det * (1.0 + ratio) / (1.0 - ratio);
}

double fpe(std::span<const double> prediction_errors, std::size_t n_p) {
    Eigen::MatrixXd e(static_cast<Eigen::Index>(prediction_errors.size()), 1);
    for (std::size_t k = 0; k < prediction_errors.size(); ++k)
        e(static_cast<Eigen::Index>(k), 0) = prediction_errors[k];
    return fpe(e, n_p);
}

std::string to_string(DatasetLabel label) {
    return label == DatasetLabel::estimation ? "estimation" : "validation";
}

} // namespace ibrid
