#pragma once

#include "ibrid/timeseries.hpp"

#include <memory>
#include <variant>

namespace ibrid {

/// Average-value grid-forming inverter: P-f / Q-V droop around cascaded
/// voltage and current PI loops on an LC output filter, simulated in its own
/// rotating frame. Optionally loaded at the PCC (conductance/susceptance) and
/// coupled through a line impedance to a stiff specified-voltage source.
struct GfmParams {
    double rated_voltage = 1.0;      ///< pu
    double nominal_frequency = 50.0; ///< Hz
    double droop_p = 0.2;            ///< m_p, Hz per pu active power
    double droop_q = 0.05;           ///< n_q, pu voltage per pu reactive power
    double filter_inductance = 0.08; ///< L_f, pu
    double filter_capacitance = 0.074; ///< C_f, pu
    double filter_resistance = 0.005;  ///< R_f, pu
    double kp_voltage = 0.25;
    double ki_voltage = 4.0;
    double kp_current = 0.64;
    double ki_current = 12.6;
    double power_filter_hz = 10.0;   ///< droop power measurement low-pass
    double load_conductance = 0.0;   ///< baseline G at PCC, pu (p_load channel overrides)
    double load_susceptance = 0.0;   ///< baseline B at PCC, pu inductive (q_load overrides)
    bool with_source = false;        ///< stiff source behind line impedance at the PCC
    double line_resistance = 0.05;   ///< pu
    double line_inductance = 0.25;   ///< pu

    void validate() const;
};

/// Average-value grid-following inverter: SRF-PLL synchronised current
/// injection through a converter filter and a line into a stiff grid source.
struct GflParams {
    double source_voltage = 1.0;     ///< pu (v_src channel overrides)
    double source_frequency = 50.0;  ///< Hz (f_src channel overrides)
    double nominal_frequency = 50.0;
    double line_resistance = 0.03;   ///< R_g, pu
    double line_inductance = 0.3;    ///< L_g, pu (weak grid)
    double filter_resistance = 0.005; ///< converter-side, pu
    double filter_inductance = 0.08;  ///< converter-side, pu
    double kp_pll = 26.7;            ///< ~3 Hz synchronisation bandwidth
    double ki_pll = 355.0;
    double kp_current = 0.14;        ///< ~30 Hz current loop
    double ki_current = 2.8;
    double id_ref = 0.5; ///< pu (id_ref channel overrides)
    double iq_ref = 0.0; ///< pu (iq_ref channel overrides)

    void validate() const;
};

/// Parameters plus the excitation schedule for one reference simulation run.
/// Duration comes from the excitation series; solver_step must not exceed its
/// sample_time.
///
/// Excitation channels (all optional, zero-order held):
///   GFM: u_ref, f_ref (setpoints), p_load, q_load (PCC admittance),
///        v_src, f_src (specified source, when with_source).
///   GFL: v_src, f_src (grid source), id_ref, iq_ref (current references).
struct PlantScenario {
    std::variant<GfmParams, GflParams> params;
    TimeSeries excitation;
    double solver_step = 5e-5; ///< s

    void validate() const;
};

/// Runs the GFM reference model. Output channels at the PCC, sampled at the
/// excitation rate: i_a, i_b, i_c, u_a, u_b, u_c (reconstructed with the local
/// angle), i_d, i_q, u_d, u_q, f. Bit-deterministic; throws DivergenceError if
/// any state magnitude exceeds 100 pu.
TimeSeries simulate_gfm(const PlantScenario& scenario);

/// Runs the GFL reference model; same channel contract, f is the PLL output.
/// Throws PllLockError when |u_q| exceeds 0.05 pu over ninety percent of a
/// trailing 2 s window.
TimeSeries simulate_gfl(const PlantScenario& scenario);

/// One output sample of a PCC-coupled device: terminal voltage in the device's
/// own dq frame plus its frequency and angle, enough for a network solver to
/// reconstruct smooth waveforms until the next exchange.
struct DeviceOutput {
    double u_d, u_q;
    double f_hz;
    double theta;
};

/// A black-box device operated one data sample at a time against an external
/// network: consumes its terminal current, produces its terminal voltage.
class PccDevice {
public:
    virtual ~PccDevice() = default;
    virtual void initialize(double sample_time) = 0;
    /// Consume the PCC current sample (abc), advance one sample, emit output.
    virtual DeviceOutput step(double i_a, double i_b, double i_c) = 0;
    virtual DeviceOutput output() const = 0;
};

/// Current-input wrapper of the GFM model (no internal load/line/source).
class GfmDevice : public PccDevice {
public:
    explicit GfmDevice(GfmParams params, double solver_step = 5e-5);
    ~GfmDevice() override;
    void initialize(double sample_time) override;
    DeviceOutput step(double i_a, double i_b, double i_c) override;
    DeviceOutput output() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Current-input wrapper of the GFL converter (bridge + filter + PLL; the
/// grid source belongs to the surrounding network).
class GflDevice : public PccDevice {
public:
    explicit GflDevice(GflParams params);
    ~GflDevice() override;
    void initialize(double sample_time) override;
    DeviceOutput step(double i_a, double i_b, double i_c) override;
    DeviceOutput output() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ibrid
