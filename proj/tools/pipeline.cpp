#include "pipeline.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/excitation.hpp"
#include "ibrid/metrics.hpp"
#include "ibrid/plant.hpp"
#include "ibrid/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace ibrid::cli {

using ordered_json = nlohmann::ordered_json;

TimeSeries build_excitation(const RunConfig& config, const std::string& dataset_label,
                            double duration) {
    std::vector<TimeSeries::Channel> channels;
    for (const auto& [name, ch] : config.excitation.channels) {
        ExcitationSpec spec;
        spec.duration = config.excitation.settle_time + duration;
        spec.sample_time = config.excitation.sample_time;
        spec.settle_time = config.excitation.settle_time;
        spec.levels = ch.levels;
        spec.min_value = ch.min_value;
        spec.max_value = ch.max_value;
        spec.min_hold = ch.min_hold;
        spec.max_hold = ch.max_hold;
        spec.seed = Rng::derive(config.seed, dataset_label + "/" + name);
        const TimeSeries one = generate_aprbs(spec, name);
        channels.push_back({name, one.channel(std::size_t{0})});
    }
    return TimeSeries(config.excitation.sample_time, std::move(channels));
}

TimeSeries run_plant(const RunConfig& config, const TimeSeries& excitation) {
    PlantScenario scenario{config.mode == "gfm" ? std::variant<GfmParams, GflParams>(config.gfm)
                                                : std::variant<GfmParams, GflParams>(config.gfl),
                           excitation, config.solver_step};
    return config.mode == "gfm" ? simulate_gfm(scenario) : simulate_gfl(scenario);
}

TimeSeries preprocess_dq(const TimeSeries& raw, double frame_alignment) {
    const auto& f = raw.channel("f");
    const auto& ua = raw.channel("u_a");
    const auto& ub = raw.channel("u_b");
    const auto& uc = raw.channel("u_c");

    // initial voltage phasor angle (Clarke) fixes theta0 deterministically
    const double alpha = (2.0 / 3.0) * (ua[0] - 0.5 * ub[0] - 0.5 * uc[0]);
    const double beta = (ub[0] - uc[0]) / 1.7320508075688772935;
    const double psi0 = std::atan2(beta, alpha);
    const double theta0 = psi0 - frame_alignment;

    const std::vector<double> theta = angle_from_frequency(f, raw.sample_time(), theta0);
    const DqPair i = abc_to_dq(raw.channel("i_a"), raw.channel("i_b"), raw.channel("i_c"), theta);
    const DqPair u = abc_to_dq(ua, ub, uc, theta);

    return TimeSeries(raw.sample_time(), {{"i_d", i.d},
                                          {"i_q", i.q},
                                          {"u_d", u.d},
                                          {"u_q", u.q},
                                          {"f", f}});
}

TimeSeries add_measurement_noise(const TimeSeries& clean, const NoiseConfig& noise,
                                 std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TimeSeries::Channel> channels;
    for (const auto& ch : clean.channels()) {
        double sd = 0.0;
        if (ch.name == "i_d" || ch.name == "i_q") sd = noise.current;
        if (ch.name == "u_d" || ch.name == "u_q") sd = noise.voltage;
        if (ch.name == "f") sd = noise.frequency;
        std::vector<double> samples = ch.samples;
        if (sd > 0.0)
            for (double& v : samples) v += rng.normal(0.0, sd);
        channels.push_back({ch.name, std::move(samples)});
    }
    return TimeSeries(clean.sample_time(), std::move(channels));
}

GeneratedData generate_datasets(const RunConfig& config) {
    const auto settle_samples = static_cast<std::size_t>(
        std::llround(config.excitation.settle_time / config.excitation.sample_time));
    // the frame anchor must see a fully settled operating point, so keep a
    // margin of settle samples through the transform and drop it afterwards
    const std::size_t margin = std::min<std::size_t>(40, settle_samples / 2);

    auto make = [&](const std::string& label, double duration) {
        const TimeSeries exc = build_excitation(config, label, duration);
        const TimeSeries raw = run_plant(config, exc);
        const std::size_t keep_from = settle_samples - margin;
        const TimeSeries trimmed = keep_from > 0 ? raw.drop_front(keep_from) : raw;
        TimeSeries dq = preprocess_dq(trimmed, config.frame_alignment);
        if (margin > 0) dq = dq.drop_front(margin);
        return add_measurement_noise(dq, config.noise, Rng::derive(config.seed, "noise/" + label));
    };
    return {make("est", config.excitation.estimation_duration),
            make("val", config.excitation.validation_duration)};
}

std::uint64_t hash_series(const TimeSeries& series) {
    std::uint64_t h = 14695981039346656037ull;
    const double dt = series.sample_time();
    h = fnv1a(&dt, sizeof dt, h);
    for (const auto& ch : series.channels()) {
        h = fnv1a(ch.name.data(), ch.name.size(), h);
        h = fnv1a(ch.samples.data(), ch.samples.size() * sizeof(double), h);
    }
    return h;
}

namespace {

const char* kOutputOrder[3] = {"u_d", "u_q", "f"};

ordered_json structure_to_json(const StructureSpec& s) {
    return ordered_json{{"family", to_string(s.family)},
                        {"nl_degree", s.nl_degree},
                        {"n_b", s.numerator_order},
                        {"n_f", s.denominator_order},
                        {"n_k", s.delay}};
}

} // namespace

IdentifyResult identify(const RunConfig& config, const TimeSeries& est_data,
                        const TimeSeries& val_data) {
    IdentifyResult result;
    ordered_json meta;
    meta["mode"] = config.mode;
    meta["seed"] = config.seed;
    meta["estimation_dataset_hash"] = hash_series(est_data);
    meta["validation_dataset_hash"] = hash_series(val_data);
    ordered_json outputs_meta = ordered_json::object();

    for (const char* output : kOutputOrder) {
        const auto it = config.model_inputs.find(output);
        const std::vector<std::string> inputs =
            it != config.model_inputs.end() ? it->second : std::vector<std::string>{"i_d", "i_q"};

        OutputIdentification oi{run_search(config.search, est_data, val_data, output, inputs,
                                           config.estimation, config.workers),
                                {}};
        oi.cascade = validation_cascade(oi.board, val_data, config.cascade);

        const Candidate& won = oi.cascade.winner;
        ordered_json om;
        om["structure"] = structure_to_json(won.structure);
        om["method"] = to_string(won.method);
        om["estimation_fit_percent"] = won.est_fit;
        om["estimation_fpe"] = won.est_fpe;
        om["estimation_loss"] = won.est_loss;
        om["validation_fit_percent"] = oi.cascade.validation_report.fit_percent;
        om["validation_fpe"] = oi.cascade.validation_report.fpe_value;
        om["validation_loss"] = oi.cascade.validation_report.loss;
        om["n_p"] = won.structure.parameter_count();
        om["candidates_total"] = oi.board.candidates.size();
        om["candidates_above_threshold"] = oi.board.above_threshold_count;
        ordered_json rejections = ordered_json::array();
        for (const auto& r : oi.cascade.rejections)
            rejections.push_back({{"candidate", r.candidate_index}, {"checks", r.failed_checks}});
        om["cascade_rejections"] = std::move(rejections);
        outputs_meta[output] = std::move(om);

        result.model.blocks.push_back(*won.model);
        result.outputs.push_back(std::move(oi));
    }
    meta["outputs"] = std::move(outputs_meta);
    result.metadata_json = meta.dump(2);
    result.model.validate();
    return result;
}

std::vector<OutputValidation> validate_model(const RunConfig& config, const HWModelMimo& model,
                                             const TimeSeries& est_data,
                                             const TimeSeries& val_data) {
    std::vector<OutputValidation> out;
    for (const auto& block : model.blocks) {
        OutputValidation v;
        v.output_name = block.output_name;
        const std::size_t discard = std::max<std::size_t>(
            static_cast<std::size_t>(std::max(config.cascade.transient_discard, 0)),
            block.linear.denominator_order());

        auto fit_on = [&](const TimeSeries& data) {
            const std::vector<double> sim = simulate_miso(block, data);
            const std::vector<double>& meas = data.channel(block.output_name);
            return nrmse_fit(std::span<const double>(meas.data() + discard, meas.size() - discard),
                             std::span<const double>(sim.data() + discard, sim.size() - discard));
        };
        v.est_fit = fit_on(est_data);
        v.val_fit = fit_on(val_data);

        std::vector<double> e = residuals(block, val_data, config.cascade.transient_discard);
        v.val_fpe = fpe(e, block.parameter_count());

        std::vector<double> test_e = e;
        std::size_t offset = discard;
        std::optional<std::vector<double>> filter;
        if (config.cascade.prewhiten_order > 0) {
            const PrewhitenResult pw = prewhiten(e, config.cascade.prewhiten_order);
            test_e = pw.filtered;
            filter = pw.coefficients;
            offset += static_cast<std::size_t>(config.cascade.prewhiten_order);
        }
        std::vector<TimeSeries::Channel> inputs;
        for (const auto& name : block.input_names) {
            const auto& u = val_data.channel(name);
            inputs.push_back(
                {name, std::vector<double>(u.begin() + static_cast<long>(offset), u.end())});
        }
        v.residual = correlation_test(test_e, inputs, config.cascade.max_lag,
                                      config.cascade.confidence);
        v.residual.prewhitening_filter = std::move(filter);
        v.pass = v.val_fit >= config.cascade.fit_threshold && v.residual.pass();
        out.push_back(std::move(v));
    }
    return out;
}

void staircase_schedule(const ClosedLoopConfig& cl, double nominal_frequency,
                        std::vector<double>& magnitude, std::vector<double>& frequency,
                        double sample_time) {
    const auto n = static_cast<std::size_t>(std::llround(cl.duration / sample_time));
    const auto hold = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                   std::llround(cl.step_hold / sample_time)));
    magnitude.resize(n);
    frequency.assign(n, nominal_frequency);
    static constexpr double pattern[] = {0.0, 1.0, 0.0, -1.0};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t level = (k / hold) % 4;
        magnitude[k] = 1.0 + cl.voltage_step * pattern[level];
    }
}

ComparisonResult closed_loop_comparison(const RunConfig& config, const HWModelMimo& model) {
    const double nominal = config.mode == "gfm" ? config.gfm.nominal_frequency
                                                : config.gfl.nominal_frequency;
    MicrogridScene scene;
    scene.sample_time = config.excitation.sample_time;
    scene.solver_step = config.closedloop.solver_step;
    scene.line_resistance = config.closedloop.line_resistance;
    scene.line_inductance = config.closedloop.line_inductance;
    scene.shunt_conductance = config.closedloop.shunt_conductance;
    scene.nominal_frequency = nominal;
    staircase_schedule(config.closedloop, nominal, scene.source_magnitude, scene.source_frequency,
                       scene.sample_time);

    GfmDevice gfm_device(config.gfm, config.closedloop.solver_step);
    GflDevice gfl_device(config.gfl);
    MicrogridScene actual = scene;
    actual.device = config.mode == "gfm" ? static_cast<PccDevice*>(&gfm_device)
                                         : static_cast<PccDevice*>(&gfl_device);

    AdaptedModel adapted(model, nominal);
    MicrogridScene surrogate = scene;
    surrogate.device = &adapted;

    return run_comparison(actual, surrogate);
}

} // namespace ibrid::cli
