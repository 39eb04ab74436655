#pragma once

#include "ibrid/hwmodel.hpp"
#include "ibrid/plant.hpp"
#include "ibrid/timeseries.hpp"

#include <map>
#include <string>
#include <vector>

namespace ibrid {

/// The identified MIMO surrogate wrapped for online operation: abc terminal
/// currents in, abc terminal voltages out, with the rotating-frame angle
/// integrated from the model's own frequency output (self-consistent frame).
/// Implements PccDevice so it can sit in the same microgrid slot as a plant.
class AdaptedModel : public PccDevice {
public:
    explicit AdaptedModel(HWModelMimo model, double nominal_frequency = 50.0);

    void initialize(double sample_time) override;
    DeviceOutput step(double i_a, double i_b, double i_c) override;
    DeviceOutput output() const override { return last_; }

    double angle() const { return theta_; }

private:
    HWModelMimo model_;
    double nominal_frequency_;
    double sample_time_ = 1e-3;
    double theta_ = 0.0;
    double f_prev_ = 50.0;
    double t_ = 0.0;
    std::vector<MisoSimulator> simulators_;
    std::map<std::string, double> feedback_; ///< previous outputs for cross-fed inputs
    DeviceOutput last_{};
};

/// One adaptation step exposed directly: theta <- theta + 2*pi*f_prev*dt is
/// handled inside AdaptedModel::step; this wrapper returns the abc voltages.
struct AdaptedStepResult {
    double u_a, u_b, u_c;
    double f_hz;
};
AdaptedStepResult step_adapted_model(AdaptedModel& model, double i_a, double i_b, double i_c);

/// PCC network for the validation microgrid: a specified-voltage source behind
/// a line impedance, plus an optional shunt load at the device terminal.
/// Schedules are sampled at sample_time and zero-order held.
struct MicrogridScene {
    double sample_time = 1e-3;  ///< data/coupling rate [s]
    double solver_step = 5e-5;  ///< network integration substep [s]
    double line_resistance = 0.05;
    double line_inductance = 0.25;
    double shunt_conductance = 0.0;
    double nominal_frequency = 50.0;
    std::vector<double> source_magnitude;  ///< pu, one value per sample
    std::vector<double> source_frequency;  ///< Hz, one value per sample
    PccDevice* device = nullptr;           ///< exactly one device under test

    std::size_t length() const { return source_magnitude.size(); }
    void validate() const;
};

/// Runs the scene; returns channels i_d, i_q, u_d, u_q, f in the device's own
/// frame at the coupling rate. Throws DivergenceError if the device diverges.
TimeSeries run_scene(const MicrogridScene& scene);

struct ChannelDeviation {
    std::string name;
    double max_abs = 0.0;
    double rms = 0.0;
};

struct ComparisonResult {
    TimeSeries traces;  ///< <ch>_actual and <ch>_surrogate for u_d, u_q, f
    std::vector<ChannelDeviation> deviations;
    bool stable = false; ///< both runs bounded over the full horizon
};

/// Runs two scenes that must be identical except for the device slot and
/// reports per-channel max/RMS deviations plus a stability verdict.
ComparisonResult run_comparison(const MicrogridScene& actual_scene,
                                const MicrogridScene& surrogate_scene);

} // namespace ibrid
