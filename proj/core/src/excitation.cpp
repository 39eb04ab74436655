#include "ibrid/excitation.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/rng.hpp"

#include <cmath>

namespace ibrid {

void ExcitationSpec::validate() const {
    if (!(sample_time > 0.0)) throw ContractError("ExcitationSpec: sample_time must be > 0");
    if (!(min_value < max_value)) throw ContractError("ExcitationSpec: bounds.min must be < bounds.max");
    if (levels < 3) throw ContractError("ExcitationSpec: levels must be >= 3");
    if (min_hold < 10.0 * sample_time)
        throw ContractError("ExcitationSpec: min_hold must be >= 10 * sample_time");
    if (!(max_hold >= min_hold)) throw ContractError("ExcitationSpec: max_hold must be >= min_hold");
    if (settle_time < 0.0) throw ContractError("ExcitationSpec: settle_time must be >= 0");
    if (duration < settle_time + min_hold)
        throw ContractError("ExcitationSpec: duration must cover settle_time plus one hold");
}

TimeSeries generate_aprbs(const ExcitationSpec& spec, const std::string& channel_name) {
    spec.validate();
    const auto total = static_cast<std::size_t>(std::llround(spec.duration / spec.sample_time));
    const auto settle = static_cast<std::size_t>(std::llround(spec.settle_time / spec.sample_time));

    std::vector<double> samples(total, spec.nominal_value());
    Rng rng(spec.seed);
    const double level_step = (spec.max_value - spec.min_value) / static_cast<double>(spec.levels - 1);

    std::size_t k = settle;
    while (k < total) {
        const auto level = rng.uniform_index(static_cast<std::uint64_t>(spec.levels));
        const double amplitude = spec.min_value + level_step * static_cast<double>(level);
        const double hold_s = rng.uniform(spec.min_hold, spec.max_hold);
        auto hold = static_cast<std::size_t>(std::llround(hold_s / spec.sample_time));
        if (hold == 0) hold = 1;
        for (std::size_t j = 0; j < hold && k < total; ++j, ++k) samples[k] = amplitude;
    }
    return TimeSeries(spec.sample_time, {{channel_name, std::move(samples)}});
}

TimeSeries build_scenario_signals(const ExcitationSpec& voltage_spec,
                                  const ExcitationSpec& frequency_spec,
                                  const std::optional<ExcitationSpec>& power_spec) {
    auto same_grid = [&](const ExcitationSpec& s) {
        return s.duration == voltage_spec.duration && s.sample_time == voltage_spec.sample_time;
    };
    if (!same_grid(frequency_spec) || (power_spec && !same_grid(*power_spec)))
        throw ContractError("build_scenario_signals: specs must share duration and sample_time");

    const TimeSeries u = generate_aprbs(voltage_spec, "u_ref");
    const TimeSeries f = generate_aprbs(frequency_spec, "f_ref");
    std::vector<TimeSeries::Channel> channels{{"u_ref", u.channel(std::size_t{0})},
                                              {"f_ref", f.channel(std::size_t{0})}};
    if (power_spec) {
        const TimeSeries p = generate_aprbs(*power_spec, "p_load");
        channels.push_back({"p_load", p.channel(std::size_t{0})});
    }
    return TimeSeries(voltage_spec.sample_time, std::move(channels));
}

} // namespace ibrid
