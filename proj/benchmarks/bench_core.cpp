#include "ibrid/estimation.hpp"
#include "ibrid/excitation.hpp"
#include "ibrid/hwmodel.hpp"
#include "ibrid/rng.hpp"
#include "ibrid/timeseries.hpp"
#include "ibrid/validation.hpp"

#include <benchmark/benchmark.h>

using namespace ibrid;

namespace {

TimeSeries make_inputs(std::size_t n) {
    Rng rng(1);
    std::vector<double> u0(n), u1(n);
    for (std::size_t k = 0; k < n; ++k) {
        u0[k] = rng.uniform(-1.0, 1.0);
        u1[k] = rng.uniform(-1.0, 1.0);
    }
    return TimeSeries(1e-3, {{"u0", u0}, {"u1", u1}});
}

HWModelMiso bench_model() {
    HWModelMiso m;
    m.input_names = {"u0", "u1"};
    m.output_name = "y";
    m.input_nonlinearities = {Nonlinearity::polynomial({0.0, 1.0, 0.2}),
                              Nonlinearity::polynomial({0.1, 0.9, -0.1})};
    m.linear.numerators = {{0.8, 0.2}, {0.4, -0.1}};
    m.linear.denominator = {-0.5, 0.1};
    m.linear.delay = 1;
    m.linear.sample_time = 1e-3;
    m.output_nonlinearity = Nonlinearity::polynomial({0.0, 1.0, 0.05});
    return m;
}

void BM_SimulateMiso(benchmark::State& state) {
    const TimeSeries inputs = make_inputs(static_cast<std::size_t>(state.range(0)));
    const HWModelMiso model = bench_model();
    for (auto _ : state) {
        auto y = simulate_miso(model, inputs);
        benchmark::DoNotOptimize(y);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateMiso)->Range(1 << 10, 1 << 15);

void BM_Jacobian(benchmark::State& state) {
    TimeSeries inputs = make_inputs(static_cast<std::size_t>(state.range(0)));
    const HWModelMiso model = bench_model();
    const auto y = simulate_miso(model, inputs);
    const TimeSeries data = inputs.with_channels({{"y", y}});
    EstimationConfig cfg;
    for (auto _ : state) {
        auto jr = jacobian(model, data, cfg);
        benchmark::DoNotOptimize(jr.jacobian);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Jacobian)->Range(1 << 10, 1 << 13);

void BM_AbcDqRoundTrip(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    std::vector<double> f(n, 50.0), d(n), q(n);
    for (std::size_t k = 0; k < n; ++k) {
        d[k] = rng.uniform(-1.0, 1.0);
        q[k] = rng.uniform(-1.0, 1.0);
    }
    const auto theta = angle_from_frequency(f, 1e-3, 0.0);
    for (auto _ : state) {
        const AbcTriple abc = dq_to_abc(d, q, theta);
        const DqPair back = abc_to_dq(abc.a, abc.b, abc.c, theta);
        benchmark::DoNotOptimize(back.d);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AbcDqRoundTrip)->Range(1 << 10, 1 << 15);

void BM_Aprbs(benchmark::State& state) {
    ExcitationSpec spec;
    spec.duration = 60.0;
    spec.sample_time = 1e-3;
    for (auto _ : state) {
        auto ts = generate_aprbs(spec);
        benchmark::DoNotOptimize(ts);
    }
}
BENCHMARK(BM_Aprbs);

void BM_CorrelationTest(benchmark::State& state) {
    Rng rng(3);
    std::vector<double> e(static_cast<std::size_t>(state.range(0)));
    for (auto& v : e) v = rng.normal(0.0, 1.0);
    std::vector<double> u(e.size());
    for (auto& v : u) v = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        auto r = correlation_test(e, {{"u", u}}, 25);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_CorrelationTest)->Range(1 << 12, 1 << 15);

} // namespace

BENCHMARK_MAIN();
