#pragma once

#include "ibrid/estimation.hpp"
#include "ibrid/metrics.hpp"
#include "ibrid/validation.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ibrid {

/// The structure-search grid: nonlinearity families (used for both the input
/// f blocks and the output h block), per-family degree ranges, linear-block
/// order/delay ranges, the fit threshold, and the epsilon guards of the
/// accuracy/complexity comparison (eps_fpe_rel is relative to the incumbent
/// FPE; eps_fit_abs is absolute percentage points).
struct SearchSpace {
    std::vector<NlFamily> families{NlFamily::piecewise_linear, NlFamily::polynomial,
                                   NlFamily::sigmoid_network, NlFamily::wavelet_network};
    std::map<NlFamily, std::pair<int, int>> degree_ranges{
        {NlFamily::polynomial, {2, 4}},
        {NlFamily::piecewise_linear, {6, 12}},
        {NlFamily::sigmoid_network, {4, 10}},
        {NlFamily::wavelet_network, {4, 10}},
        {NlFamily::identity, {0, 0}},
    };
    std::pair<int, int> numerator_range{1, 3};   ///< n_b
    std::pair<int, int> denominator_range{1, 4}; ///< n_f
    std::pair<int, int> delay_range{0, 2};       ///< n_k
    double fit_threshold = 92.0;                 ///< percent
    double eps_fpe_rel = 0.10;
    double eps_fit_abs = 1.0;

    void validate() const;
};

/// One fitted (or rejected) grid point.
struct Candidate {
    StructureSpec structure;
    Method method = Method::levenberg_marquardt;
    std::size_t index = 0; ///< stable grid-enumeration index
    std::string status;    ///< "ok", "invalid_structure", "numerical_failure"
    Termination termination = Termination::max_iter;
    int iterations = 0;
    double est_fit = 0.0;
    double est_fpe = 0.0;
    double est_loss = 0.0;
    std::optional<HWModelMiso> model;

    bool fitted() const { return status == "ok"; }
};

struct Leaderboard {
    std::string output_name;
    double fit_threshold = 92.0;
    double eps_fpe_rel = 0.10;
    double eps_fit_abs = 1.0;
    std::vector<Candidate> candidates;      ///< every grid point, in stable-index order
    std::optional<std::size_t> best_index;  ///< position in `candidates`
    std::size_t above_threshold_count = 0;  ///< est_fit > fit_threshold

    const Candidate& best() const;
};

/// Deterministic method selection per grid point: Levenberg-Marquardt by
/// default, subspace Gauss-Newton for large parameterizations (n_p > 60),
/// the adaptive variant when additionally the family is a unit network, and
/// steepest descent as the retry after an LM numerical failure.
Method decide_search_algorithm(const StructureSpec& combination, bool after_lm_failure = false);

/// The Algorithm-1 best-model update with one-sided epsilon guards:
///   - challenger fitter  and FPE <= (1+eps1) * best FPE -> challenger
///   - challenger simpler (lower FPE) and fit >= best fit - eps2 -> challenger
///   - otherwise the incumbent survives; exact ties keep the lower index.
const Candidate& compare_and_update(const Candidate& best, const Candidate& challenger,
                                    double eps_fpe_rel, double eps_fit_abs);

/// Exhaustive grid search for one output channel. Individual candidate
/// failures are recorded, never abort the run. `workers` <= 0 picks the
/// hardware concurrency; results are identical for any worker count.
Leaderboard run_search(const SearchSpace& space, const TimeSeries& est_data,
                       const TimeSeries& val_data, const std::string& output_name,
                       const std::vector<std::string>& input_names,
                       const EstimationConfig& est_config, int workers = 1);

/// Pass rules for the downward validation walk.
struct CascadeConfig {
    double fit_threshold = 92.0;   ///< on validation-data NRMSE
    double loss_ratio_max = 10.0;  ///< val loss <= ratio * est loss
    int max_lag = 25;
    double confidence = 0.99;
    int prewhiten_order = 0; ///< 0 disables prewhitening
    int transient_discard = 50;
};

struct CascadeRejection {
    std::size_t candidate_index;
    std::vector<std::string> failed_checks;
};

struct CascadeResult {
    Candidate winner;
    FitReport validation_report;
    ResidualReport residual_report;
    std::vector<CascadeRejection> rejections;
};

/// Walks candidates from the best downwards (compare_and_update ordering),
/// re-scoring each on validation data and running the residual tests; returns
/// the first candidate passing everything. Throws ExhaustionError carrying the
/// full rejection log when none passes.
CascadeResult validation_cascade(const Leaderboard& board, const TimeSeries& val_data,
                                 const CascadeConfig& config);

/// One CSV record per candidate: combination, method, fits, FPE, status.
void save_leaderboard(const Leaderboard& board, const std::filesystem::path& path);

} // namespace ibrid
