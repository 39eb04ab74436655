#pragma once

#include "config.hpp"

#include "ibrid/closedloop.hpp"
#include "ibrid/hwmodel.hpp"
#include "ibrid/search.hpp"
#include "ibrid/timeseries.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ibrid::cli {

/// Scenario excitation for one dataset: every configured channel as an
/// independent APRBS (seeds derived from the run seed and the dataset label).
TimeSeries build_excitation(const RunConfig& config, const std::string& dataset_label,
                            double duration);

/// Runs the configured plant under the excitation (raw 11-channel output).
TimeSeries run_plant(const RunConfig& config, const TimeSeries& excitation);

/// The dq preprocessing stage: rotating angle reconstructed from the measured
/// frequency (theta0 chosen so the initial voltage phasor sits at
/// frame_alignment), abc -> dq transforms, i_d/i_q/u_d/u_q/f assembled.
TimeSeries preprocess_dq(const TimeSeries& raw, double frame_alignment);

/// Seeded Gaussian measurement noise per channel group.
TimeSeries add_measurement_noise(const TimeSeries& clean, const NoiseConfig& noise,
                                 std::uint64_t seed);

struct GeneratedData {
    TimeSeries estimation;
    TimeSeries validation;
};

/// Full gen-data stage: excitation -> plant -> settle drop -> dq preprocessing
/// -> measurement noise, for both datasets (disjoint seeds).
GeneratedData generate_datasets(const RunConfig& config);

/// Stable fingerprint of a series (channel names + sample bits).
std::uint64_t hash_series(const TimeSeries& series);

struct OutputIdentification {
    Leaderboard board;
    CascadeResult cascade;
};

struct IdentifyResult {
    HWModelMimo model;
    std::vector<OutputIdentification> outputs; ///< order: u_d, u_q, f
    std::string metadata_json;                 ///< artifact metadata / run summary
};

/// Per-output structure search + validation cascade; composes the 3-MISO
/// surrogate. Throws ExhaustionError when a cascade finds no valid candidate.
IdentifyResult identify(const RunConfig& config, const TimeSeries& est_data,
                        const TimeSeries& val_data);

struct OutputValidation {
    std::string output_name;
    double est_fit = 0.0;
    double val_fit = 0.0;
    double val_fpe = 0.0;
    ResidualReport residual;
    bool pass = false;
};

/// Re-runs metrics and residual tests for a loaded model on named datasets.
std::vector<OutputValidation> validate_model(const RunConfig& config, const HWModelMimo& model,
                                             const TimeSeries& est_data,
                                             const TimeSeries& val_data);

/// The +-voltage_step specified-voltage staircase schedule for the microgrid scene.
void staircase_schedule(const ClosedLoopConfig& cl, double nominal_frequency,
                        std::vector<double>& magnitude, std::vector<double>& frequency,
                        double sample_time);

/// Builds both scenes (black box vs adapted surrogate) and runs the comparison.
ComparisonResult closed_loop_comparison(const RunConfig& config, const HWModelMimo& model);

} // namespace ibrid::cli
