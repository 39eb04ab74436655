#pragma once

#include "ibrid/hwmodel.hpp"
#include "ibrid/timeseries.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ibrid {

/// Autocorrelation/cross-correlation sequences with the two-sided 99%
/// confidence bound and per-test verdicts.
struct ResidualReport {
    std::vector<double> residuals;
    std::vector<double> autocorrelation; ///< r_ee(tau), tau = 0..max_lag; r_ee(0) = 1
    struct CrossCorrelation {
        std::string input_name;
        std::vector<double> values; ///< tau = -max_lag..max_lag
        bool pass = false;
    };
    std::vector<CrossCorrelation> cross_correlations;
    int max_lag = 25;
    double confidence_bound = 0.0; ///< z_{0.995} / sqrt(N)
    bool autocorrelation_pass = false;
    bool degenerate = false; ///< zero-variance residuals; tests trivially pass
    std::optional<std::vector<double>> prewhitening_filter; ///< AR coefficients when applied

    bool pass() const;
};

/// e[k] = measured[k] - simulated[k] with the transient prefix removed
/// (consistent with estimation's discard rule).
std::vector<double> residuals(const HWModelMiso& model, const TimeSeries& data,
                              int transient_discard = 50);

/// Whiteness (autocorrelation) and independence (input-residual
/// cross-correlation) tests at the given confidence (99% -> bound 2.576/sqrt(N)).
/// Autocorrelation passes iff |r_ee(tau)| <= bound for tau in 1..max_lag (lag 0
/// exempt); each cross-correlation passes iff within the bound at every tested lag.
ResidualReport correlation_test(std::span<const double> residual_channel,
                                const std::vector<TimeSeries::Channel>& inputs, int max_lag,
                                double confidence = 0.99);

/// Least-squares AR(order) fit to the (mean-removed) residuals; returns the
/// filter's prediction residuals and the coefficients e[k] ~= sum a_i e[k-i].
struct PrewhitenResult {
    std::vector<double> filtered;
    std::vector<double> coefficients;
};
PrewhitenResult prewhiten(std::span<const double> residual_channel, int order);

} // namespace ibrid
