#include "ibrid/estimation.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/metrics.hpp"
#include "ibrid/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ibrid;

namespace {

HWModelMiso static_gain_model(double gain) {
    HWModelMiso m;
    m.input_names = {"u"};
    m.output_name = "y";
    m.input_nonlinearities = {Nonlinearity::identity()};
    m.linear.numerators = {{gain}};
    m.linear.denominator = {};
    m.linear.delay = 0;
    m.linear.sample_time = 1e-3;
    m.output_nonlinearity = Nonlinearity::identity();
    return m;
}

EstimationConfig no_discard_config() {
    EstimationConfig c;
    c.transient_discard = 0;
    return c;
}

TimeSeries random_inputs(Rng& rng, std::size_t n, std::vector<std::string> names,
                         double lo = -1.5, double hi = 1.5) {
    std::vector<TimeSeries::Channel> chans;
    for (auto& name : names) {
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(lo, hi);
        chans.push_back({std::move(name), std::move(v)});
    }
    return TimeSeries(1e-3, std::move(chans));
}

// known polynomial-Hammerstein generator used by several oracles
HWModelMiso poly_generator() {
    HWModelMiso g;
    g.input_names = {"u0", "u1"};
    g.output_name = "y";
    g.input_nonlinearities = {Nonlinearity::polynomial({0.1, 1.0, 0.3}),
                              Nonlinearity::polynomial({-0.2, 0.8, -0.15})};
    g.linear.numerators = {{0.9, 0.2}, {0.5, -0.3}};
    g.linear.denominator = {-0.5, 0.15};
    g.linear.delay = 1;
    g.linear.sample_time = 1e-3;
    g.output_nonlinearity = Nonlinearity::polynomial({0.05, 1.1, 0.08});
    g.output_offset = 0.0;
    g.output_scale = 1.0;
    return g;
}

double max_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

Eigen::MatrixXd fd_jacobian(const HWModelMiso& model, const TimeSeries& data, int discard) {
    const std::vector<double> theta = model.pack();
    const std::size_t np = theta.size();
    const std::size_t d = std::max<std::size_t>(static_cast<std::size_t>(discard),
                                                model.linear.denominator_order());
    const std::size_t rows = data.length() - d;
    Eigen::MatrixXd jac(rows, np);
    for (std::size_t p = 0; p < np; ++p) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[p]));
        HWModelMiso m = model;
        std::vector<double> t = theta;
        t[p] += h;
        m.unpack(t);
        const auto yp = simulate_miso(m, data);
        t[p] = theta[p] - h;
        m.unpack(t);
        const auto ym = simulate_miso(m, data);
        for (std::size_t k = 0; k < rows; ++k)
            jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) =
                -(yp[k + d] - ym[k + d]) / (2.0 * h);
    }
    return jac;
}

} // namespace

TEST_SUITE("estimation") {

TEST_CASE("loss of an exact model is zero") {
    Rng rng(1);
    const HWModelMiso m = static_gain_model(2.0);
    TimeSeries u = random_inputs(rng, 50, {"u"});
    const auto y = simulate_miso(m, u);
    const TimeSeries data = u.with_channels({{"y", y}});
    CHECK(loss(m, data, no_discard_config()) == 0.0);
}

TEST_CASE("loss matches the hand-computed alternating example") {
    const HWModelMiso m = static_gain_model(1.0);
    const std::vector<double> u{1.0, 2.0, -1.0, 0.5};
    std::vector<double> y(u);
    const double e[] = {1.0, -1.0, 1.0, -1.0};
    for (std::size_t k = 0; k < 4; ++k) y[k] += e[k];
    const TimeSeries data(1e-3, {{"u", u}, {"y", y}});
    CHECK(loss(m, data, no_discard_config()) == doctest::Approx(1.0).epsilon(1e-15));

    EstimationConfig scaled = no_discard_config();
    scaled.weight = 2.0 * Eigen::MatrixXd::Identity(1, 1);
    CHECK(loss(m, data, scaled) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("static gain jacobian column is minus the input") {
    Rng rng(2);
    const HWModelMiso m = static_gain_model(1.7);
    TimeSeries u = random_inputs(rng, 40, {"u"});
    std::vector<double> y(40, 0.0);
    const TimeSeries data = u.with_channels({{"y", y}});
    const JacobianResult jr = jacobian(m, data, no_discard_config());
    REQUIRE(jr.jacobian.cols() == 1);
    for (std::size_t k = 0; k < 40; ++k)
        CHECK(jr.jacobian(static_cast<Eigen::Index>(k), 0) ==
              doctest::Approx(-u.channel("u")[k]).epsilon(1e-12));
}

TEST_CASE("analytic jacobian matches finite differences on a polynomial HW model") {
    Rng rng(3);
    const HWModelMiso g = poly_generator();
    TimeSeries u = random_inputs(rng, 300, {"u0", "u1"});
    const auto y = simulate_miso(g, u);
    const TimeSeries data = u.with_channels({{"y", y}});
    const JacobianResult jr = jacobian(g, data, no_discard_config());
    const Eigen::MatrixXd fd = fd_jacobian(g, data, 0);
    CHECK(max_rel_error(jr.jacobian, fd) <= 1e-4);
}

TEST_CASE("zero-amplitude unit translation is a dead column") {
    HWModelMiso m = static_gain_model(1.0);
    m.output_nonlinearity = Nonlinearity::sigmoid_network({{0.0, 1.0, 0.4}}, 0.0, 1.0);
    Rng rng(4);
    TimeSeries u = random_inputs(rng, 30, {"u"});
    const TimeSeries data = u.with_channels({{"y", std::vector<double>(30, 0.0)}});
    const JacobianResult jr = jacobian(m, data, no_discard_config());
    // packed h params: [amplitude, dilation, translation, offset, slope]
    const Eigen::Index col = 1 + 2; // after the linear gain: amplitude, dilation, translation
    for (Eigen::Index k = 0; k < jr.jacobian.rows(); ++k) CHECK(jr.jacobian(k, col) == 0.0);
}

TEST_CASE("one gauss-newton step solves the linear-gain problem exactly") {
    Rng rng(5);
    TimeSeries u = random_inputs(rng, 100, {"u"});
    std::vector<double> y(100);
    for (std::size_t k = 0; k < 100; ++k) y[k] = 2.0 * u.channel("u")[k];
    const TimeSeries data = u.with_channels({{"y", y}});

    EstimationConfig cfg = no_discard_config();
    cfg.method = Method::subspace_gauss_newton;
    const FitResult fit = estimate(static_gain_model(0.0), data, cfg);
    CHECK(fit.model.linear.numerators[0][0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.final_loss <= 1e-24);
    CHECK(fit.iterations <= 2);
}

TEST_CASE("self-consistency: refitting the generating structure reaches 99.9 percent") {
    Rng rng(6);
    const HWModelMiso g = poly_generator();
    TimeSeries u = random_inputs(rng, 600, {"u0", "u1"});
    const auto y = simulate_miso(g, u);
    const TimeSeries data = u.with_channels({{"y", y}});

    StructureSpec spec;
    spec.family = NlFamily::polynomial;
    spec.nl_degree = 2;
    spec.numerator_order = 2;
    spec.denominator_order = 2;
    spec.delay = 1;
    spec.input_names = {"u0", "u1"};
    spec.output_name = "y";

    EstimationConfig cfg;
    cfg.transient_discard = 20;
    const FitResult fit = estimate(initialize(spec, data), data, cfg);
    const auto sim = simulate_miso(fit.model, data);
    const std::span<const double> meas(y.data() + 20, y.size() - 20);
    const std::span<const double> model(sim.data() + 20, sim.size() - 20);
    CHECK(nrmse_fit(meas, model) >= 99.9);
}

TEST_CASE("lm with vanishing damping reproduces the gauss-newton step") {
    Rng rng(7);
    Eigen::MatrixXd jac(60, 4);
    Eigen::VectorXd err(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) jac(i, j) = rng.uniform(-1.0, 1.0);
        err(i) = rng.uniform(-1.0, 1.0);
    }
    const Eigen::VectorXd gn = detail::gauss_newton_step(jac, err, 1.0, 1e-12);
    const Eigen::VectorXd lm = detail::lm_step(jac, err, 1.0, 1e-13);
    CHECK((gn - lm).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("all four methods agree on a linear-in-parameters problem") {
    Rng rng(8);
    TimeSeries u = random_inputs(rng, 200, {"u"});
    std::vector<double> y(200, 0.0);
    const auto& uu = u.channel("u");
    for (std::size_t k = 0; k < 200; ++k) {
        y[k] = 1.4 * uu[k];
        if (k >= 1) y[k] += -0.6 * uu[k - 1];
    }
    const TimeSeries data = u.with_channels({{"y", y}});

    HWModelMiso init = static_gain_model(0.0);
    init.linear.numerators = {{0.0, 0.0}}; // FIR(2): exactly the generator class

    std::vector<Eigen::VectorXd> solutions;
    for (Method method : {Method::levenberg_marquardt, Method::subspace_gauss_newton,
                          Method::adaptive_subspace_gauss_newton, Method::steepest_descent}) {
        EstimationConfig cfg = no_discard_config();
        cfg.method = method;
        cfg.max_iterations = 400;
        const FitResult fit = estimate(init, data, cfg);
        const auto theta = fit.model.pack();
        solutions.emplace_back(Eigen::Map<const Eigen::VectorXd>(theta.data(),
                                                                 static_cast<Eigen::Index>(theta.size())));
    }
    for (std::size_t i = 1; i < solutions.size(); ++i)
        CHECK((solutions[i] - solutions[0]).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(solutions[0](0) == doctest::Approx(1.4).epsilon(1e-8));
    CHECK(solutions[0](1) == doctest::Approx(-0.6).epsilon(1e-8));
}

TEST_CASE("accepted-step loss traces never increase") {
    Rng rng(9);
    for (int trial = 0; trial < 4; ++trial) {
        const HWModelMiso g = poly_generator();
        TimeSeries u = random_inputs(rng, 250, {"u0", "u1"});
        auto y = simulate_miso(g, u);
        for (auto& v : y) v += rng.normal(0.0, 0.01);
        const TimeSeries data = u.with_channels({{"y", y}});

        StructureSpec spec;
        spec.family = trial % 2 == 0 ? NlFamily::polynomial : NlFamily::sigmoid_network;
        spec.nl_degree = trial % 2 == 0 ? 2 : 3;
        spec.numerator_order = 2;
        spec.denominator_order = 2;
        spec.delay = 1;
        spec.input_names = {"u0", "u1"};
        spec.output_name = "y";

        EstimationConfig cfg;
        cfg.max_iterations = 25;
        cfg.method = trial < 2 ? Method::levenberg_marquardt : Method::subspace_gauss_newton;
        const FitResult fit = estimate(initialize(spec, data), data, cfg);
        for (std::size_t i = 1; i < fit.loss_trace.size(); ++i)
            CHECK(fit.loss_trace[i] <= fit.loss_trace[i - 1]);
    }
}

TEST_CASE("initialization reproduces the arx solution and identity nonlinearities") {
    Rng rng(10);
    TimeSeries u = random_inputs(rng, 400, {"u0"});
    const auto& uu = u.channel("u0");
    std::vector<double> y(400, 0.0);
    for (std::size_t k = 1; k < 400; ++k) y[k] = 0.6 * y[k - 1] + 0.8 * uu[k - 1];
    const TimeSeries data = u.with_channels({{"y", y}});

    StructureSpec spec;
    spec.family = NlFamily::polynomial;
    spec.nl_degree = 2;
    spec.numerator_order = 1;
    spec.denominator_order = 1;
    spec.delay = 1;
    spec.input_names = {"u0"};
    spec.output_name = "y";

    const HWModelMiso init = initialize(spec, data);
    // noiseless ARX-generated data: coefficients recovered up to the tiny
    // finite-sample bias of the mean-removed regression
    CHECK(init.linear.denominator[0] == doctest::Approx(-0.6).epsilon(1e-4));
    CHECK(init.linear.numerators[0][0] == doctest::Approx(0.8).epsilon(1e-4));

    // input nonlinearity acts as the identity over the observed range
    for (double x = -1.4; x <= 1.4; x += 0.2)
        CHECK(init.input_nonlinearities[0](x) == doctest::Approx(x).epsilon(1e-9));
    // composed output path likewise: h((x - o)/s) == x up to the recorded
    // operating-point shift
    for (double x = -2.0; x <= 2.0; x += 0.25) {
        const double xn = (x - init.output_offset) / init.output_scale;
        CHECK(init.output_nonlinearity(xn) == doctest::Approx(x).epsilon(1e-4));
    }

    // simulation fit of the initialized model on its own data is near-perfect
    const auto sim = simulate_miso(init, data);
    CHECK(nrmse_fit(std::span<const double>(y.data() + 1, 399),
                    std::span<const double>(sim.data() + 1, 399)) >= 99.0);
}

TEST_CASE("rank-deficient regression falls back to a unit-gain block") {
    const std::size_t n = 120;
    std::vector<double> u(n, 0.0), y(n, 0.0); // zero input: regression is singular
    const TimeSeries data(1e-3, {{"u0", u}, {"y", y}});
    StructureSpec spec;
    spec.family = NlFamily::identity;
    spec.nl_degree = 0;
    spec.numerator_order = 2;
    spec.denominator_order = 1;
    spec.delay = 0;
    spec.input_names = {"u0"};
    spec.output_name = "y";
    const HWModelMiso init = initialize(spec, data);
    CHECK(init.linear.numerators[0][0] == 1.0);
    CHECK(init.linear.denominator[0] == 0.0);
}

TEST_CASE("divergent candidates report an infinite loss sentinel") {
    HWModelMiso m = static_gain_model(1.0);
    m.linear.denominator = {-2.5}; // unstable pole at 2.5
    Rng rng(11);
    TimeSeries u = random_inputs(rng, 400, {"u"});
    const TimeSeries data = u.with_channels({{"y", std::vector<double>(400, 0.0)}});
    CHECK(std::isinf(loss(m, data, no_discard_config())));
}

} // TEST_SUITE
