#include "ibrid/validation.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/estimation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace ibrid {

namespace {

// two-sided normal quantile for the supported confidence levels
double z_quantile(double confidence) {
    if (std::abs(confidence - 0.99) < 1e-12) return 2.576;
    if (std::abs(confidence - 0.95) < 1e-12) return 1.96;
    throw ContractError("correlation_test: unsupported confidence level");
}

double mean_of(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

} // namespace

bool ResidualReport::pass() const {
    if (degenerate) return true;
    if (!autocorrelation_pass) return false;
    return std::all_of(cross_correlations.begin(), cross_correlations.end(),
                       [](const CrossCorrelation& c) { return c.pass; });
}

std::vector<double> residuals(const HWModelMiso& model, const TimeSeries& data,
                              int transient_discard) {
    return prediction_errors(model, data, transient_discard);
}

ResidualReport correlation_test(std::span<const double> residual_channel,
                                const std::vector<TimeSeries::Channel>& inputs, int max_lag,
                                double confidence) {
    const std::size_t n = residual_channel.size();
    if (max_lag < 1) throw ContractError("correlation_test: max_lag must be >= 1");
    if (n <= 10 * static_cast<std::size_t>(max_lag))
        throw ContractError("correlation_test: need N > 10 * max_lag");

    ResidualReport report;
    report.max_lag = max_lag;
    report.residuals.assign(residual_channel.begin(), residual_channel.end());
    report.confidence_bound = z_quantile(confidence) / std::sqrt(static_cast<double>(n));

    for (const auto& input : inputs)
        if (input.samples.size() != n)
            throw ContractError("correlation_test: input '" + input.name + "' length mismatch");

    const double e_mean = mean_of(residual_channel);
    std::vector<double> e(n);
    double r_ee0 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = residual_channel[k] - e_mean;
        r_ee0 += e[k] * e[k];
    }

    // zero-variance up to accumulation noise around the mean
    const double degenerate_floor =
        static_cast<double>(n) * 1e-24 * (1.0 + e_mean * e_mean);
    if (r_ee0 <= degenerate_floor) {
        report.degenerate = true;
        report.autocorrelation_pass = true;
        report.autocorrelation.assign(static_cast<std::size_t>(max_lag) + 1, 0.0);
        report.autocorrelation[0] = 1.0;
        for (const auto& u : inputs)
            report.cross_correlations.push_back(
                {u.name, std::vector<double>(2 * static_cast<std::size_t>(max_lag) + 1, 0.0), true});
        return report;
    }

    report.autocorrelation.resize(static_cast<std::size_t>(max_lag) + 1);
    report.autocorrelation[0] = 1.0;
    report.autocorrelation_pass = true;
    for (int tau = 1; tau <= max_lag; ++tau) {
        double acc = 0.0;
        for (std::size_t k = static_cast<std::size_t>(tau); k < n; ++k)
            acc += e[k] * e[k - static_cast<std::size_t>(tau)];
        const double r = acc / r_ee0;
        report.autocorrelation[static_cast<std::size_t>(tau)] = r;
        if (std::abs(r) > report.confidence_bound) report.autocorrelation_pass = false;
    }

    for (const auto& input : inputs) {
        const double u_mean = mean_of(input.samples);
        std::vector<double> u(n);
        double r_uu0 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            u[k] = input.samples[k] - u_mean;
            r_uu0 += u[k] * u[k];
        }
        ResidualReport::CrossCorrelation cc;
        cc.input_name = input.name;
        cc.values.resize(2 * static_cast<std::size_t>(max_lag) + 1);
        cc.pass = true;
        const double norm = std::sqrt(r_uu0 * r_ee0);
        for (int tau = -max_lag; tau <= max_lag; ++tau) {
            double acc = 0.0;
            // r_ue(tau) ~ sum u[k] e[k + tau]
            for (std::size_t k = 0; k < n; ++k) {
                const long kk = static_cast<long>(k) + tau;
                if (kk >= 0 && kk < static_cast<long>(n)) acc += u[k] * e[static_cast<std::size_t>(kk)];
            }
            const double r = norm > 0.0 ? acc / norm : 0.0;
            cc.values[static_cast<std::size_t>(tau + max_lag)] = r;
            if (std::abs(r) > report.confidence_bound) cc.pass = false;
        }
        report.cross_correlations.push_back(std::move(cc));
    }
    return report;
}

PrewhitenResult prewhiten(std::span<const double> residual_channel, int order) {
    const std::size_t n = residual_channel.size();
    if (order < 1) throw ContractError("prewhiten: order must be >= 1");
    if (n < static_cast<std::size_t>(order) * 10 + 10)
        throw ContractError("prewhiten: residual sequence too short for the order");

    const double m = mean_of(residual_channel);
    std::vector<double> e(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = residual_channel[k] - m;
        var += e[k] * e[k];
    }
    if (var <= static_cast<double>(n) * 1e-24 * (1.0 + m * m))
        throw NumericalError("prewhiten: zero-variance residuals, normal equations singular");

    const auto p = static_cast<std::size_t>(order);
    const std::size_t rows = n - p;
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows));
    for (std::size_t k = 0; k < rows; ++k) {
        for (std::size_t i = 0; i < p; ++i)
            phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = e[k + p - 1 - i];
        rhs(static_cast<Eigen::Index>(k)) = e[k + p];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    if (qr.rank() < static_cast<Eigen::Index>(p))
        throw NumericalError("prewhiten: singular normal equations");
    const Eigen::VectorXd a = qr.solve(rhs);

    PrewhitenResult out;
    out.coefficients.resize(p);
    for (std::size_t i = 0; i < p; ++i) out.coefficients[i] = a(static_cast<Eigen::Index>(i));
    out.filtered.resize(rows);
    for (std::size_t k = 0; k < rows; ++k) {
        double pred = 0.0;
        for (std::size_t i = 0; i < p; ++i) pred += out.coefficients[i] * e[k + p - 1 - i];
        out.filtered[k] = e[k + p] - pred;
    }
    return out;
}

} // namespace ibrid
