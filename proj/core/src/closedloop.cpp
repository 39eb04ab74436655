#include "ibrid/closedloop.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/ode.hpp"

#include <algorithm>
#include <cmath>

namespace ibrid {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kTwoThirdsPi = 2.0943951023931954923084289221863;
} // namespace

AdaptedModel::AdaptedModel(HWModelMimo model, double nominal_frequency)
    : model_(std::move(model)), nominal_frequency_(nominal_frequency) {
    model_.validate();
    if (model_.blocks.size() != 3)
        throw ContractError("AdaptedModel: expected the 3-block (u_d, u_q, f) surrogate");
    model_.block_for("u_d");
    model_.block_for("u_q");
    model_.block_for("f");
}

void AdaptedModel::initialize(double sample_time) {
    if (!(sample_time > 0.0)) throw ContractError("AdaptedModel: sample_time must be > 0");
    sample_time_ = sample_time;
    theta_ = 0.0;
    f_prev_ = nominal_frequency_;
    t_ = 0.0;
    simulators_.clear();
    for (const auto& block : model_.blocks) {
        simulators_.emplace_back(block);
        for (const auto& name : block.input_names)
            if (name != "i_d" && name != "i_q" && name != "u_d" && name != "u_q" && name != "f")
                throw ContractError("AdaptedModel: unsupported input channel '" + name + "'");
    }
    feedback_ = {{"u_d", 1.0}, {"u_q", 0.0}, {"f", nominal_frequency_}};
    last_ = {1.0, 0.0, nominal_frequency_, 0.0};
}

DeviceOutput AdaptedModel::step(double i_a, double i_b, double i_c) {
    theta_ += kTwoPi * f_prev_ * sample_time_;
    t_ += sample_time_;

    double i_d, i_q;
    abc_to_dq_sample(i_a, i_b, i_c, theta_, i_d, i_q);

    std::map<std::string, double> values = feedback_;
    values["i_d"] = i_d;
    values["i_q"] = i_q;

    std::map<std::string, double> outputs;
    std::vector<double> u;
    for (std::size_t b = 0; b < model_.blocks.size(); ++b) {
        const auto& block = model_.blocks[b];
        u.resize(block.input_names.size());
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = values.at(block.input_names[i]);
        outputs[block.output_name] = simulators_[b].step(u);
    }
    const double u_d = outputs.at("u_d");
    const double u_q = outputs.at("u_q");
    const double f = outputs.at("f");
    if (!std::isfinite(u_d) || !std::isfinite(u_q) || !std::isfinite(f))
        throw DivergenceError("AdaptedModel: non-finite output", t_);

    feedback_["u_d"] = u_d;
    feedback_["u_q"] = u_q;
    feedback_["f"] = f;
    f_prev_ = f;
    last_ = {u_d, u_q, f, theta_};
    return last_;
}

AdaptedStepResult step_adapted_model(AdaptedModel& model, double i_a, double i_b, double i_c) {
    const DeviceOutput out = model.step(i_a, i_b, i_c);
    AdaptedStepResult r{};
    dq_to_abc_sample(out.u_d, out.u_q, out.theta, r.u_a, r.u_b, r.u_c);
    r.f_hz = out.f_hz;
    return r;
}

// ---------------------------------------------------------------------------
// Microgrid scene
// ---------------------------------------------------------------------------

void MicrogridScene::validate() const {
    if (!device) throw ContractError("MicrogridScene: no device in the slot");
    if (source_magnitude.size() != source_frequency.size() || source_magnitude.empty())
        throw ContractError("MicrogridScene: source schedules must be nonempty and equal length");
    if (!(sample_time > 0.0) || !(solver_step > 0.0) || solver_step > sample_time + 1e-15)
        throw ContractError("MicrogridScene: need 0 < solver_step <= sample_time");
    if (!(line_inductance > 0.0)) throw ContractError("MicrogridScene: line_inductance must be > 0");
}

TimeSeries run_scene(const MicrogridScene& scene) {
    scene.validate();
    const std::size_t n = scene.length();
    const double dt = scene.sample_time;
    const double wb = kTwoPi * scene.nominal_frequency;
    const auto substeps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(dt / scene.solver_step)));
    const double h = dt / static_cast<double>(substeps);

    PccDevice& dev = *scene.device;
    dev.initialize(dt);
    DeviceOutput held = dev.output();

    // network state: per-phase line currents (device -> source) and source angle
    double i_line[3] = {0.0, 0.0, 0.0};
    double theta_src = 0.0;

    std::vector<double> id(n), iq(n), ud(n), uq(n), f(n);
    id[0] = iq[0] = 0.0;
    ud[0] = held.u_d;
    uq[0] = held.u_q;
    f[0] = held.f_hz;

    for (std::size_t k = 1; k < n; ++k) {
        const double v_mag = scene.source_magnitude[k - 1];
        const double f_src = scene.source_frequency[k - 1];

        // integrate the line over [t_{k-1}, t_k) with the device and source
        // waveforms reconstructed smoothly from their held dq/frequency values
        double u_abc[3];
        for (std::size_t s = 0; s < substeps; ++s) {
            const double tau = static_cast<double>(s) * h;
            auto reconstruct = [&](double tloc, double out[3]) {
                const double th_dev = held.theta + kTwoPi * held.f_hz * tloc;
                dq_to_abc_sample(held.u_d, held.u_q, th_dev, out[0], out[1], out[2]);
            };
            auto source_at = [&](double tloc, double out[3]) {
                const double th = theta_src + kTwoPi * f_src * tloc;
                out[0] = v_mag * std::cos(th);
                out[1] = v_mag * std::cos(th - kTwoThirdsPi);
                out[2] = v_mag * std::cos(th + kTwoThirdsPi);
            };
            // RK4 on the three independent per-phase RL branches
            double k1[3], k2[3], k3[3], k4[3], tmp[3], va[3], vs[3];
            auto rl = [&](double tloc, const double il[3], double out[3]) {
                reconstruct(tloc, va);
                source_at(tloc, vs);
                for (int p = 0; p < 3; ++p)
                    out[p] = wb / scene.line_inductance *
                             (va[p] - vs[p] - scene.line_resistance * il[p]);
            };
            rl(tau, i_line, k1);
            for (int p = 0; p < 3; ++p) tmp[p] = i_line[p] + 0.5 * h * k1[p];
            rl(tau + 0.5 * h, tmp, k2);
            for (int p = 0; p < 3; ++p) tmp[p] = i_line[p] + 0.5 * h * k2[p];
            rl(tau + 0.5 * h, tmp, k3);
            for (int p = 0; p < 3; ++p) tmp[p] = i_line[p] + h * k3[p];
            rl(tau + h, tmp, k4);
            for (int p = 0; p < 3; ++p)
                i_line[p] += h / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
        }
        theta_src += kTwoPi * f_src * dt;

        // device terminal current at the exchange instant: line + shunt
        {
            const double th_dev = held.theta + kTwoPi * held.f_hz * dt;
            dq_to_abc_sample(held.u_d, held.u_q, th_dev, u_abc[0], u_abc[1], u_abc[2]);
        }
        double i_dev[3];
        for (int p = 0; p < 3; ++p) i_dev[p] = i_line[p] + scene.shunt_conductance * u_abc[p];

        held = dev.step(i_dev[0], i_dev[1], i_dev[2]);
        abc_to_dq_sample(i_dev[0], i_dev[1], i_dev[2], held.theta, id[k], iq[k]);
        ud[k] = held.u_d;
        uq[k] = held.u_q;
        f[k] = held.f_hz;
    }

    return TimeSeries(dt, {{"i_d", std::move(id)},
                           {"i_q", std::move(iq)},
                           {"u_d", std::move(ud)},
                           {"u_q", std::move(uq)},
                           {"f", std::move(f)}});
}

namespace {

bool bounded(const TimeSeries& run, double nominal_frequency) {
    const auto& ud = run.channel("u_d");
    const auto& uq = run.channel("u_q");
    const auto& f = run.channel("f");
    for (std::size_t k = 0; k < run.length(); ++k) {
        if (std::abs(ud[k]) > 3.0 || std::abs(uq[k]) > 3.0) return false;
        if (std::abs(f[k] - nominal_frequency) > 10.0) return false;
    }
    return true;
}

} // namespace

ComparisonResult run_comparison(const MicrogridScene& actual_scene,
                                const MicrogridScene& surrogate_scene) {
    const bool same = actual_scene.sample_time == surrogate_scene.sample_time &&
                      actual_scene.solver_step == surrogate_scene.solver_step &&
                      actual_scene.line_resistance == surrogate_scene.line_resistance &&
                      actual_scene.line_inductance == surrogate_scene.line_inductance &&
                      actual_scene.shunt_conductance == surrogate_scene.shunt_conductance &&
                      actual_scene.nominal_frequency == surrogate_scene.nominal_frequency &&
                      actual_scene.source_magnitude == surrogate_scene.source_magnitude &&
                      actual_scene.source_frequency == surrogate_scene.source_frequency;
    if (!same)
        throw ContractError("run_comparison: scenes must be identical except the device slot");

    TimeSeries actual = [&] {
        try {
            return run_scene(actual_scene);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string("actual slot: ") + e.what(), e.time());
        }
    }();
    TimeSeries surrogate = [&] {
        try {
            return run_scene(surrogate_scene);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string("surrogate slot: ") + e.what(), e.time());
        }
    }();

    ComparisonResult result{TimeSeries(actual.sample_time(),
                                       {{"u_d_actual", actual.channel("u_d")},
                                        {"u_d_surrogate", surrogate.channel("u_d")},
                                        {"u_q_actual", actual.channel("u_q")},
                                        {"u_q_surrogate", surrogate.channel("u_q")},
                                        {"f_actual", actual.channel("f")},
                                        {"f_surrogate", surrogate.channel("f")}}),
                            {},
                            false};

    for (const char* name : {"u_d", "u_q", "f"}) {
        const auto& a = actual.channel(name);
        const auto& b = surrogate.channel(name);
        ChannelDeviation dev;
        dev.name = name;
        double acc = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double d = std::abs(a[k] - b[k]);
            dev.max_abs = std::max(dev.max_abs, d);
            acc += d * d;
        }
        dev.rms = std::sqrt(acc / static_cast<double>(a.size()));
        result.deviations.push_back(std::move(dev));
    }
    result.stable = bounded(actual, actual_scene.nominal_frequency) &&
                    bounded(surrogate, surrogate_scene.nominal_frequency);
    return result;
}

} // namespace ibrid
