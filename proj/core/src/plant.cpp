#include "ibrid/plant.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace ibrid {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kStateLimit = 100.0; // pu; beyond this the run is declared divergent

double channel_or(const TimeSeries& exc, const char* name, std::size_t k, double fallback) {
    return exc.has_channel(name) ? exc.channel(name)[k] : fallback;
}

void check_state(std::span<const double> x, double t, const char* what) {
    for (double v : x)
        if (!std::isfinite(v) || std::abs(v) > kStateLimit)
            throw DivergenceError(std::string(what) + ": state divergence", t);
}

} // namespace

void GfmParams::validate() const {
    if (!(droop_p > 0.0)) throw ContractError("GfmParams: droop_p must be > 0");
    if (!(filter_inductance > 0.0 && filter_capacitance > 0.0))
        throw ContractError("GfmParams: filter L and C must be > 0");
    const double gains[] = {droop_q, filter_resistance, kp_voltage, ki_voltage,
                            kp_current, ki_current, load_conductance, load_susceptance,
                            line_resistance};
    for (double g : gains)
        if (g < 0.0) throw ContractError("GfmParams: gains and impedances must be >= 0");
    if (with_source && !(line_inductance > 0.0))
        throw ContractError("GfmParams: line_inductance must be > 0 with a source");
}

void GflParams::validate() const {
    if (!(kp_pll > 0.0 && ki_pll > 0.0)) throw ContractError("GflParams: PLL gains must be > 0");
    if (!(line_inductance > 0.0)) throw ContractError("GflParams: line_inductance must be > 0");
    if (!(filter_inductance > 0.0)) throw ContractError("GflParams: filter_inductance must be > 0");
    if (kp_current < 0.0 || ki_current < 0.0)
        throw ContractError("GflParams: current-loop gains must be >= 0");
}

void PlantScenario::validate() const {
    std::visit([](const auto& p) { p.validate(); }, params);
    if (!(solver_step > 0.0) || solver_step > excitation.sample_time() + 1e-15)
        throw ContractError("PlantScenario: solver_step must be in (0, sample_time]");
}

// ---------------------------------------------------------------------------
// GFM
// ---------------------------------------------------------------------------

namespace {

// State layout: per-unit electrical states first (those are bounds-checked),
// angles last (they grow without bound by design). Line/source states stay
// zero when the scenario has no source.
enum GfmState {
    ILD, ILQ,   // inverter-side filter current
    VOD, VOQ,   // filter capacitor (PCC) voltage
    XID, XIQ,   // voltage-loop integrators
    GAD, GAQ,   // current-loop integrators
    PF, QF,     // filtered active/reactive power
    IGD, IGQ,   // line current to the source
    GFM_CHECKED_DIM,
    TH = GFM_CHECKED_DIM, // own angle
    DSRC,                 // source angle minus own angle
    GFM_DIM
};

struct GfmInputs {
    double u_set, f_set; // setpoints
    double g_load, b_load;
    double v_src, f_src;
    // external terminal current (device mode); NaN means network-derived
    double i_ext_d = std::numeric_limits<double>::quiet_NaN();
    double i_ext_q = std::numeric_limits<double>::quiet_NaN();
};

struct GfmOutputsDq {
    double i_d, i_q, u_d, u_q, f, theta;
};

class GfmCore {
public:
    GfmCore(const GfmParams& p, bool external_current)
        : p_(p), external_current_(external_current), wb_(kTwoPi * p.nominal_frequency) {}

    bool with_line() const { return p_.with_source && !external_current_; }

    std::vector<double> initial_state(double u0) const {
        std::vector<double> x(GFM_DIM, 0.0);
        x[VOD] = u0;
        return x;
    }

    void rhs(std::span<const double> x, const GfmInputs& in, std::span<double> dx) const {
        const double f = in.f_set - p_.droop_p * x[PF];
        const double w_pu = f / p_.nominal_frequency;
        const double w_pu_safe = std::max(w_pu, 0.1);

        double i_od, i_oq;
        if (external_current_) {
            i_od = in.i_ext_d;
            i_oq = in.i_ext_q;
        } else {
            const double b_eff = in.b_load / w_pu_safe;
            i_od = in.g_load * x[VOD] + b_eff * x[VOQ];
            i_oq = in.g_load * x[VOQ] - b_eff * x[VOD];
            if (with_line()) {
                i_od += x[IGD];
                i_oq += x[IGQ];
            }
        }

        const double p = x[VOD] * i_od + x[VOQ] * i_oq;
        const double q = x[VOQ] * i_od - x[VOD] * i_oq;
        const double wc = kTwoPi * p_.power_filter_hz;
        dx[PF] = wc * (p - x[PF]);
        dx[QF] = wc * (q - x[QF]);

        const double v_ref_d = in.u_set - p_.droop_q * x[QF];
        const double ev_d = v_ref_d - x[VOD];
        const double ev_q = -x[VOQ];
        dx[XID] = ev_d;
        dx[XIQ] = ev_q;

        const double i_ref_d =
            i_od - w_pu * p_.filter_capacitance * x[VOQ] + p_.kp_voltage * ev_d + p_.ki_voltage * x[XID];
        const double i_ref_q =
            i_oq + w_pu * p_.filter_capacitance * x[VOD] + p_.kp_voltage * ev_q + p_.ki_voltage * x[XIQ];

        const double ei_d = i_ref_d - x[ILD];
        const double ei_q = i_ref_q - x[ILQ];
        dx[GAD] = ei_d;
        dx[GAQ] = ei_q;

        const double v_cd =
            x[VOD] - w_pu * p_.filter_inductance * x[ILQ] + p_.kp_current * ei_d + p_.ki_current * x[GAD];
        const double v_cq =
            x[VOQ] + w_pu * p_.filter_inductance * x[ILD] + p_.kp_current * ei_q + p_.ki_current * x[GAQ];

        const double lf = p_.filter_inductance, cf = p_.filter_capacitance, rf = p_.filter_resistance;
        dx[ILD] = wb_ / lf * (v_cd - x[VOD] - rf * x[ILD] + w_pu * lf * x[ILQ]);
        dx[ILQ] = wb_ / lf * (v_cq - x[VOQ] - rf * x[ILQ] - w_pu * lf * x[ILD]);
        dx[VOD] = wb_ / cf * (x[ILD] - i_od + w_pu * cf * x[VOQ]);
        dx[VOQ] = wb_ / cf * (x[ILQ] - i_oq - w_pu * cf * x[VOD]);
        dx[TH] = kTwoPi * f;

        if (with_line()) {
            const double v_sd = in.v_src * std::cos(x[DSRC]);
            const double v_sq = in.v_src * std::sin(x[DSRC]);
            const double ll = p_.line_inductance, rl = p_.line_resistance;
            dx[IGD] = wb_ / ll * (x[VOD] - v_sd - rl * x[IGD] + w_pu * ll * x[IGQ]);
            dx[IGQ] = wb_ / ll * (x[VOQ] - v_sq - rl * x[IGQ] - w_pu * ll * x[IGD]);
            dx[DSRC] = kTwoPi * (in.f_src - f);
        } else {
            dx[IGD] = dx[IGQ] = dx[DSRC] = 0.0;
        }
    }

    GfmOutputsDq outputs(std::span<const double> x, const GfmInputs& in) const {
        GfmOutputsDq o{};
        const double f = in.f_set - p_.droop_p * x[PF];
        const double w_pu_safe = std::max(f / p_.nominal_frequency, 0.1);
        if (external_current_) {
            o.i_d = in.i_ext_d;
            o.i_q = in.i_ext_q;
        } else {
            const double b_eff = in.b_load / w_pu_safe;
            o.i_d = in.g_load * x[VOD] + b_eff * x[VOQ];
            o.i_q = in.g_load * x[VOQ] - b_eff * x[VOD];
            if (with_line()) {
                o.i_d += x[IGD];
                o.i_q += x[IGQ];
            }
        }
        o.u_d = x[VOD];
        o.u_q = x[VOQ];
        o.f = f;
        o.theta = x[TH];
        return o;
    }

private:
    GfmParams p_;
    bool external_current_;
    double wb_;
};

GfmInputs gfm_inputs_at(const GfmParams& p, const TimeSeries& exc, std::size_t k) {
    GfmInputs in{};
    in.u_set = channel_or(exc, "u_ref", k, p.rated_voltage);
    in.f_set = channel_or(exc, "f_ref", k, p.nominal_frequency);
    in.g_load = channel_or(exc, "p_load", k, p.load_conductance);
    in.b_load = channel_or(exc, "q_load", k, p.load_susceptance);
    in.v_src = channel_or(exc, "v_src", k, 1.0);
    in.f_src = channel_or(exc, "f_src", k, p.nominal_frequency);
    return in;
}

TimeSeries emit_series(const TimeSeries& exc, const std::vector<GfmOutputsDq>& rows) {
    const std::size_t n = rows.size();
    std::vector<double> ia(n), ib(n), ic(n), ua(n), ub(n), uc(n), id(n), iq(n), ud(n), uq(n), f(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& r = rows[k];
        dq_to_abc_sample(r.i_d, r.i_q, r.theta, ia[k], ib[k], ic[k]);
        dq_to_abc_sample(r.u_d, r.u_q, r.theta, ua[k], ub[k], uc[k]);
        id[k] = r.i_d;
        iq[k] = r.i_q;
        ud[k] = r.u_d;
        uq[k] = r.u_q;
        f[k] = r.f;
    }
    return TimeSeries(exc.sample_time(),
                      {{"i_a", std::move(ia)},
                       {"i_b", std::move(ib)},
                       {"i_c", std::move(ic)},
                       {"u_a", std::move(ua)},
                       {"u_b", std::move(ub)},
                       {"u_c", std::move(uc)},
                       {"i_d", std::move(id)},
                       {"i_q", std::move(iq)},
                       {"u_d", std::move(ud)},
                       {"u_q", std::move(uq)},
                       {"f", std::move(f)}});
}

} // namespace

TimeSeries simulate_gfm(const PlantScenario& scenario) {
    scenario.validate();
    const auto& p = std::get<GfmParams>(scenario.params);
    const TimeSeries& exc = scenario.excitation;
    const double dt = exc.sample_time();
    const auto substeps = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(dt / scenario.solver_step)));
    const double h = dt / static_cast<double>(substeps);

    GfmCore core(p, /*external_current=*/false);
    std::vector<double> x = core.initial_state(gfm_inputs_at(p, exc, 0).u_set);

    std::vector<GfmOutputsDq> rows;
    rows.reserve(exc.length());
    rows.push_back(core.outputs(x, gfm_inputs_at(p, exc, 0)));

    for (std::size_t k = 1; k < exc.length(); ++k) {
        const GfmInputs in = gfm_inputs_at(p, exc, k - 1);
        const OdeRhs rhs = [&](double, std::span<const double> s, std::span<double> d) {
            core.rhs(s, in, d);
        };
        const double t0 = static_cast<double>(k - 1) * dt;
        for (std::size_t s = 0; s < substeps; ++s)
            rk4_step(rhs, t0 + static_cast<double>(s) * h, h, x);
        check_state(std::span<const double>(x.data(), GFM_CHECKED_DIM),
                    static_cast<double>(k) * dt, "simulate_gfm");
        rows.push_back(core.outputs(x, gfm_inputs_at(p, exc, k)));
    }
    return emit_series(exc, rows);
}

// ---------------------------------------------------------------------------
// GFL
// ---------------------------------------------------------------------------

namespace {

// electrical states first (bounds-checked), angles last
enum GflState { GID, GIQ, GGAD, GGAQ, GXPLL, GFL_CHECKED_DIM, GDELTA = GFL_CHECKED_DIM, GTH, GFL_DIM };

struct GflInputs {
    double v_g, f_g, id_ref, iq_ref;
};

class GflCore {
public:
    explicit GflCore(const GflParams& p)
        : p_(p),
          wb_(kTwoPi * p.nominal_frequency),
          rt_(p.line_resistance + p.filter_resistance),
          lt_(p.line_inductance + p.filter_inductance) {}

    std::vector<double> initial_state() const { return std::vector<double>(GFL_DIM, 0.0); }

    void control(std::span<const double> x, const GflInputs& in, double& v_cd, double& v_cq) const {
        // decoupling at nominal speed; the integrators absorb the residual
        v_cd = 1.0 + p_.kp_current * (in.id_ref - x[GID]) + p_.ki_current * x[GGAD] - lt_ * x[GIQ];
        v_cq = p_.kp_current * (in.iq_ref - x[GIQ]) + p_.ki_current * x[GGAQ] + lt_ * x[GID];
    }

    void pcc_voltage(std::span<const double> x, const GflInputs& in, double& u_d, double& u_q) const {
        double v_cd, v_cq;
        control(x, in, v_cd, v_cq);
        const double v_gd = in.v_g * std::cos(x[GDELTA]);
        const double v_gq = in.v_g * std::sin(x[GDELTA]);
        const double ratio = p_.line_inductance / lt_;
        // series-branch voltage divider; rotation terms cancel exactly
        u_d = v_gd + p_.line_resistance * x[GID] + ratio * (v_cd - v_gd - rt_ * x[GID]);
        u_q = v_gq + p_.line_resistance * x[GIQ] + ratio * (v_cq - v_gq - rt_ * x[GIQ]);
    }

    double pll_speed(std::span<const double> x, const GflInputs& in) const {
        double u_d, u_q;
        pcc_voltage(x, in, u_d, u_q);
        return wb_ + p_.kp_pll * u_q + x[GXPLL];
    }

    void rhs(std::span<const double> x, const GflInputs& in, std::span<double> dx) const {
        double v_cd, v_cq;
        control(x, in, v_cd, v_cq);
        const double v_gd = in.v_g * std::cos(x[GDELTA]);
        const double v_gq = in.v_g * std::sin(x[GDELTA]);
        double u_d, u_q;
        pcc_voltage(x, in, u_d, u_q);
        const double w_pll = wb_ + p_.kp_pll * u_q + x[GXPLL];

        dx[GID] = wb_ / lt_ * (v_cd - v_gd - rt_ * x[GID]) + w_pll * x[GIQ];
        dx[GIQ] = wb_ / lt_ * (v_cq - v_gq - rt_ * x[GIQ]) - w_pll * x[GID];
        dx[GGAD] = in.id_ref - x[GID];
        dx[GGAQ] = in.iq_ref - x[GIQ];
        dx[GXPLL] = p_.ki_pll * u_q;
        dx[GDELTA] = kTwoPi * in.f_g - w_pll;
        dx[GTH] = w_pll;
    }

    GfmOutputsDq outputs(std::span<const double> x, const GflInputs& in) const {
        GfmOutputsDq o{};
        o.i_d = x[GID];
        o.i_q = x[GIQ];
        pcc_voltage(x, in, o.u_d, o.u_q);
        o.f = pll_speed(x, in) / kTwoPi;
        o.theta = x[GTH];
        return o;
    }

private:
    GflParams p_;
    double wb_, rt_, lt_;
};

GflInputs gfl_inputs_at(const GflParams& p, const TimeSeries& exc, std::size_t k) {
    GflInputs in{};
    in.v_g = channel_or(exc, "v_src", k, p.source_voltage);
    in.f_g = channel_or(exc, "f_src", k, p.source_frequency);
    in.id_ref = channel_or(exc, "id_ref", k, p.id_ref);
    in.iq_ref = channel_or(exc, "iq_ref", k, p.iq_ref);
    return in;
}

} // namespace

TimeSeries simulate_gfl(const PlantScenario& scenario) {
    scenario.validate();
    const auto& p = std::get<GflParams>(scenario.params);
    const TimeSeries& exc = scenario.excitation;
    const double dt = exc.sample_time();
    const auto substeps = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(dt / scenario.solver_step)));
    const double h = dt / static_cast<double>(substeps);

    GflCore core(p);
    std::vector<double> x = core.initial_state();

    std::vector<GfmOutputsDq> rows;
    rows.reserve(exc.length());
    rows.push_back(core.outputs(x, gfl_inputs_at(p, exc, 0)));

    // lock monitor: fraction of |u_q| > 0.05 samples over a trailing 2 s window
    const std::size_t window = std::max<std::size_t>(1, static_cast<std::size_t>(2.0 / dt));
    std::vector<bool> unlocked(window, false);
    std::size_t unlocked_count = 0;

    for (std::size_t k = 1; k < exc.length(); ++k) {
        const GflInputs in = gfl_inputs_at(p, exc, k - 1);
        const OdeRhs rhs = [&](double, std::span<const double> s, std::span<double> d) {
            core.rhs(s, in, d);
        };
        const double t0 = static_cast<double>(k - 1) * dt;
        for (std::size_t s = 0; s < substeps; ++s)
            rk4_step(rhs, t0 + static_cast<double>(s) * h, h, x);
        check_state(std::span<const double>(x.data(), GFL_CHECKED_DIM),
                    static_cast<double>(k) * dt, "simulate_gfl");

        const GfmOutputsDq out = core.outputs(x, gfl_inputs_at(p, exc, k));
        const std::size_t slot = k % window;
        unlocked_count -= unlocked[slot] ? 1 : 0;
        unlocked[slot] = std::abs(out.u_q) > 0.05;
        unlocked_count += unlocked[slot] ? 1 : 0;
        if (k >= window && 10 * unlocked_count > 9 * window)
            throw PllLockError("simulate_gfl: PLL lost lock near t=" +
                               std::to_string(static_cast<double>(k) * dt) + " s");
        rows.push_back(out);
    }
    return emit_series(exc, rows);
}

// ---------------------------------------------------------------------------
// PCC devices for co-simulation
// ---------------------------------------------------------------------------

struct GfmDevice::Impl {
    GfmParams params;
    GfmCore core;
    double solver_step;
    double dt = 1e-3;
    double t = 0.0;
    std::vector<double> x;
    DeviceOutput last{};

    Impl(GfmParams p, double step) : params(p), core(p, /*external_current=*/true), solver_step(step) {}
};

GfmDevice::GfmDevice(GfmParams params, double solver_step)
    : impl_(std::make_unique<Impl>(params, solver_step)) {
    params.validate();
}

GfmDevice::~GfmDevice() = default;

void GfmDevice::initialize(double sample_time) {
    impl_->dt = sample_time;
    impl_->t = 0.0;
    impl_->x = impl_->core.initial_state(impl_->params.rated_voltage);
    impl_->last = {impl_->params.rated_voltage, 0.0, impl_->params.nominal_frequency, 0.0};
}

DeviceOutput GfmDevice::step(double i_a, double i_b, double i_c) {
    auto& im = *impl_;
    GfmInputs in{};
    in.u_set = im.params.rated_voltage;
    in.f_set = im.params.nominal_frequency;
    abc_to_dq_sample(i_a, i_b, i_c, im.x[TH], in.i_ext_d, in.i_ext_q);

    const auto substeps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(im.dt / im.solver_step)));
    const double h = im.dt / static_cast<double>(substeps);
    const OdeRhs rhs = [&](double, std::span<const double> s, std::span<double> d) {
        im.core.rhs(s, in, d);
    };
    for (std::size_t s = 0; s < substeps; ++s) rk4_step(rhs, 0.0, h, im.x);
    im.t += im.dt;
    check_state(std::span<const double>(im.x.data(), GFM_CHECKED_DIM), im.t, "GfmDevice");

    const GfmOutputsDq o = im.core.outputs(im.x, in);
    im.last = {o.u_d, o.u_q, o.f, o.theta};
    return im.last;
}

DeviceOutput GfmDevice::output() const { return impl_->last; }

struct GflDevice::Impl {
    GflParams params;
    double dt = 1e-3;
    double theta = 0.0;
    double ga_d = 0.0, ga_q = 0.0, x_pll = 0.0;
    DeviceOutput last{};
};

GflDevice::GflDevice(GflParams params) : impl_(std::make_unique<Impl>()) {
    params.validate();
    impl_->params = params;
}

GflDevice::~GflDevice() = default;

void GflDevice::initialize(double sample_time) {
    auto& im = *impl_;
    im.dt = sample_time;
    im.theta = 0.0;
    im.ga_d = im.ga_q = im.x_pll = 0.0;
    im.last = {1.0, 0.0, im.params.nominal_frequency, 0.0};
}

DeviceOutput GflDevice::step(double i_a, double i_b, double i_c) {
    auto& im = *impl_;
    const auto& p = im.params;
    double i_d, i_q;
    abc_to_dq_sample(i_a, i_b, i_c, im.theta, i_d, i_q);

    // held current within the sample: u = v_c - (R_f + j w L_f) i
    const double v_cd = 1.0 + p.kp_current * (p.id_ref - i_d) + p.ki_current * im.ga_d -
                        p.filter_inductance * i_q;
    const double v_cq =
        p.kp_current * (p.iq_ref - i_q) + p.ki_current * im.ga_q + p.filter_inductance * i_d;
    const double u_d = v_cd - p.filter_resistance * i_d + p.filter_inductance * i_q;
    const double u_q = v_cq - p.filter_resistance * i_q - p.filter_inductance * i_d;

    const double wb = kTwoPi * p.nominal_frequency;
    const double w_pll = wb + p.kp_pll * u_q + im.x_pll;
    im.x_pll += p.ki_pll * u_q * im.dt;
    im.ga_d += (p.id_ref - i_d) * im.dt;
    im.ga_q += (p.iq_ref - i_q) * im.dt;
    im.theta += w_pll * im.dt;

    im.last = {u_d, u_q, w_pll / kTwoPi, im.theta};
    if (!std::isfinite(u_d) || !std::isfinite(u_q))
        throw DivergenceError("GflDevice: non-finite output", 0.0);
    return im.last;
}

DeviceOutput GflDevice::output() const { return impl_->last; }

} // namespace ibrid
