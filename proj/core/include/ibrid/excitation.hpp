#pragma once

#include "ibrid/timeseries.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace ibrid {

/// Amplitude-modulated multilevel step sequence (APRBS). A plain binary PRBS
/// cannot expose input nonlinearities, so segment amplitudes are drawn from
/// `levels` equispaced values spanning `bounds` and held for a random duration.
struct ExcitationSpec {
    double duration = 10.0;     ///< total length including settle [s]
    double sample_time = 1e-3;  ///< [s]
    int levels = 7;             ///< >= 3
    double min_value = 0.9;
    double max_value = 1.1;
    double min_hold = 0.2;      ///< [s], >= 10 * sample_time
    double max_hold = 1.0;      ///< [s]
    double settle_time = 1.0;   ///< initial constant-nominal stretch [s]
    std::uint64_t seed = 1;
    std::optional<double> nominal; ///< settle value; midpoint of bounds when unset

    double nominal_value() const { return nominal ? *nominal : 0.5 * (min_value + max_value); }
    void validate() const; ///< throws ContractError on an invalid spec
};

/// One-channel piecewise-constant APRBS signal, deterministic in spec.seed.
TimeSeries generate_aprbs(const ExcitationSpec& spec, const std::string& channel_name = "u");

/// Multi-channel scenario excitation: `u_ref` (pu), `f_ref` (Hz) and optional
/// `p_load` (pu). Specs must share duration and sample_time; independent seeds
/// keep the level sequences uncorrelated.
TimeSeries build_scenario_signals(const ExcitationSpec& voltage_spec,
                                  const ExcitationSpec& frequency_spec,
                                  const std::optional<ExcitationSpec>& power_spec);

} // namespace ibrid
