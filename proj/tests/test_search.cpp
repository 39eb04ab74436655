#include "ibrid/search.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace ibrid;

namespace {

StructureSpec spec_of(NlFamily family, int degree, int nb, int nf, int nk) {
    StructureSpec s;
    s.family = family;
    s.nl_degree = degree;
    s.numerator_order = nb;
    s.denominator_order = nf;
    s.delay = nk;
    s.input_names = {"u0", "u1"};
    s.output_name = "y";
    return s;
}

Candidate fake_candidate(std::size_t index, double fit, double fpe_value,
                         double est_loss = 1e-4) {
    Candidate c;
    c.index = index;
    c.status = "ok";
    c.est_fit = fit;
    c.est_fpe = fpe_value;
    c.est_loss = est_loss;
    return c;
}

HWModelMiso gain_model(double gain, const std::string& in = "u", const std::string& out = "y") {
    HWModelMiso m;
    m.input_names = {in};
    m.output_name = out;
    m.input_nonlinearities = {Nonlinearity::identity()};
    m.linear.numerators = {{gain}};
    m.linear.denominator = {};
    m.linear.delay = 0;
    m.linear.sample_time = 1e-3;
    m.output_nonlinearity = Nonlinearity::identity();
    return m;
}

// small polynomial-Hammerstein generator for the search oracles
HWModelMiso search_generator() {
    HWModelMiso g;
    g.input_names = {"u0", "u1"};
    g.output_name = "y";
    g.input_nonlinearities = {Nonlinearity::polynomial({0.0, 1.0, 0.25}),
                              Nonlinearity::polynomial({0.1, 0.9, -0.2})};
    g.linear.numerators = {{0.8, 0.3}, {0.4, -0.2}};
    g.linear.denominator = {-0.6, 0.12};
    g.linear.delay = 1;
    g.linear.sample_time = 1e-3;
    g.output_nonlinearity = Nonlinearity::polynomial({0.0, 1.0, 0.1});
    return g;
}

struct SearchFixture {
    TimeSeries est;
    TimeSeries val;
    SearchSpace space;
    EstimationConfig config;

    SearchFixture() : est(make_data(11)), val(make_data(22)) {
        space.families = {NlFamily::polynomial};
        space.degree_ranges[NlFamily::polynomial] = {2, 2};
        space.numerator_range = {2, 2};
        space.denominator_range = {2, 2};
        space.delay_range = {0, 1};
        config.transient_discard = 20;
        config.max_iterations = 30;
    }

    static TimeSeries make_data(std::uint64_t seed) {
        Rng rng(seed);
        const std::size_t n = 500;
        std::vector<double> u0(n), u1(n);
        for (std::size_t k = 0; k < n; ++k) {
            u0[k] = rng.uniform(-1.0, 1.0);
            u1[k] = rng.uniform(-1.0, 1.0);
        }
        TimeSeries inputs(1e-3, {{"u0", u0}, {"u1", u1}});
        const auto y = simulate_miso(search_generator(), inputs);
        return inputs.with_channels({{"y", y}});
    }
};

} // namespace

TEST_SUITE("search") {

TEST_CASE("method decision rule") {
    CHECK(decide_search_algorithm(spec_of(NlFamily::polynomial, 2, 2, 2, 0)) ==
          Method::levenberg_marquardt);
    // wavelet, 20 units, 2 inputs: n_p = 3*(3*20+2) + 2*2 + 2 far beyond 60
    CHECK(decide_search_algorithm(spec_of(NlFamily::wavelet_network, 20, 2, 2, 0)) ==
          Method::adaptive_subspace_gauss_newton);
    // large but not a unit network
    CHECK(decide_search_algorithm(spec_of(NlFamily::polynomial, 30, 2, 2, 0)) ==
          Method::subspace_gauss_newton);
    CHECK(decide_search_algorithm(spec_of(NlFamily::polynomial, 2, 2, 2, 0), true) ==
          Method::steepest_descent);
}

TEST_CASE("compare_and_update branch semantics") {
    // dominance satisfies the first guard
    const Candidate best = fake_candidate(0, 95.0, 1.0);
    const Candidate dominant = fake_candidate(1, 97.0, 0.5);
    CHECK(compare_and_update(best, dominant, 0.10, 1.0).index == 1);

    // fitter but far more complex: rejected
    const Candidate complex_one = fake_candidate(2, 98.0, 5.0);
    CHECK(compare_and_update(best, complex_one, 0.10, 1.0).index == 0);

    // half the FPE at 0.4 points lower fit: the complexity branch wins
    const Candidate simpler = fake_candidate(3, 94.6, 0.5);
    CHECK(compare_and_update(best, simpler, 0.10, 1.0).index == 3);

    // slightly fitter within the FPE closeness guard
    const Candidate close = fake_candidate(4, 95.5, 1.05);
    CHECK(compare_and_update(best, close, 0.10, 1.0).index == 4);

    // exact tie keeps the incumbent (lower stable index)
    const Candidate tie = fake_candidate(5, 95.0, 1.0);
    CHECK(compare_and_update(best, tie, 0.10, 1.0).index == 0);
}

TEST_CASE("search space validation") {
    SearchSpace s;
    s.fit_threshold = 0.0;
    CHECK_THROWS_AS(s.validate(), ContractError);
    SearchSpace s2;
    s2.families = {};
    CHECK_THROWS_AS(s2.validate(), ContractError);
}

TEST_CASE("generator-in-grid search finds a near-perfect candidate") {
    const SearchFixture fx;
    const Leaderboard board =
        run_search(fx.space, fx.est, fx.val, "y", {"u0", "u1"}, fx.config, 1);
    CHECK(board.candidates.size() == 2); // nk in {0, 1}
    REQUIRE(board.best_index.has_value());
    CHECK(board.best().est_fit >= 99.9);
    CHECK(board.best().structure.delay == 1);
    CHECK(board.above_threshold_count >= 1);

    // best is never dominated by any stored candidate
    for (const auto& c : board.candidates) {
        if (!c.fitted()) continue;
        const bool dominates = c.est_fit > board.best().est_fit && c.est_fpe < board.best().est_fpe;
        CHECK_FALSE(dominates);
    }
}

TEST_CASE("reruns and worker counts do not change the leaderboard") {
    const SearchFixture fx;
    const Leaderboard a = run_search(fx.space, fx.est, fx.val, "y", {"u0", "u1"}, fx.config, 1);
    const Leaderboard b = run_search(fx.space, fx.est, fx.val, "y", {"u0", "u1"}, fx.config, 1);
    const Leaderboard c = run_search(fx.space, fx.est, fx.val, "y", {"u0", "u1"}, fx.config, 3);

    auto same = [](const Leaderboard& x, const Leaderboard& y) {
        REQUIRE(x.candidates.size() == y.candidates.size());
        CHECK(x.best_index == y.best_index);
        CHECK(x.above_threshold_count == y.above_threshold_count);
        for (std::size_t i = 0; i < x.candidates.size(); ++i) {
            CHECK(x.candidates[i].status == y.candidates[i].status);
            CHECK(x.candidates[i].est_fit == y.candidates[i].est_fit); // bit-exact
            CHECK(x.candidates[i].est_fpe == y.candidates[i].est_fpe);
            CHECK(x.candidates[i].method == y.candidates[i].method);
        }
    };
    same(a, b);
    same(a, c);
}

TEST_CASE("structurally invalid combinations are logged, not fitted") {
    SearchFixture fx;
    fx.space.numerator_range = {1, 3};
    fx.space.denominator_range = {0, 1};
    fx.space.delay_range = {0, 0};
    const Leaderboard board =
        run_search(fx.space, fx.est, fx.val, "y", {"u0", "u1"}, fx.config, 1);
    CHECK(board.candidates.size() == 6); // 3 numerators x 2 denominators
    std::size_t invalid = 0;
    for (const auto& c : board.candidates)
        if (c.status == "invalid_structure") {
            ++invalid;
            // exactly the combinations with n_f < n_b - 1
            CHECK(c.structure.denominator_order < c.structure.numerator_order - 1);
        }
    CHECK(invalid == 3); // (2,0), (3,0), (3,1)
}

TEST_CASE("leaderboard csv is written with one record per candidate") {
    const SearchFixture fx;
    const Leaderboard board =
        run_search(fx.space, fx.est, fx.val, "y", {"u0", "u1"}, fx.config, 1);
    const auto path = std::filesystem::temp_directory_path() / "ibrid_tests" / "board.csv";
    std::filesystem::create_directories(path.parent_path());
    save_leaderboard(board, path);
    std::ifstream f(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++lines;
    CHECK(lines == board.candidates.size() + 1);
}

TEST_CASE("cascade returns the first candidate passing every check") {
    // validation data from a unit-gain truth with mild noise
    Rng rng(5);
    const std::size_t n = 2000;
    std::vector<double> u(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
        u[k] = rng.uniform(-1.0, 1.0);
        y[k] = u[k] + rng.normal(0.0, 0.01);
    }
    const TimeSeries val(1e-3, {{"u", u}, {"y", y}});

    Leaderboard board;
    board.output_name = "y";
    board.eps_fpe_rel = 0.10;
    board.eps_fit_abs = 1.0;

    Candidate wrong = fake_candidate(0, 99.5, 1e-9); // ranked first by its est metrics
    wrong.model = gain_model(0.5);
    wrong.structure = spec_of(NlFamily::identity, 0, 1, 0, 0);
    Candidate right = fake_candidate(1, 98.0, 2e-9);
    right.model = gain_model(1.0);
    right.structure = spec_of(NlFamily::identity, 0, 1, 0, 0);
    board.candidates = {wrong, right};
    board.best_index = 0;

    CascadeConfig cfg;
    cfg.fit_threshold = 92.0;
    cfg.transient_discard = 0;
    const CascadeResult result = validation_cascade(board, val, cfg);
    CHECK(result.winner.index == 1);
    REQUIRE(result.rejections.size() == 1);
    CHECK(result.rejections[0].candidate_index == 0);
    bool names_fit = false;
    for (const auto& check : result.rejections[0].failed_checks)
        if (check == "validation_fit") names_fit = true;
    CHECK(names_fit);

    // first-hit: the correct model ranked first passes with no rejections
    Leaderboard board2 = board;
    board2.candidates[0] = right;
    board2.candidates[0].index = 0;
    board2.candidates[1] = wrong;
    board2.candidates[1].index = 1;
    board2.candidates[0].est_fit = 99.9;
    board2.candidates[0].est_fpe = 1e-10;
    const CascadeResult r2 = validation_cascade(board2, val, cfg);
    CHECK(r2.winner.index == 0);
    CHECK(r2.rejections.empty());

    // exhaustion: every candidate fails
    Leaderboard board3 = board;
    board3.candidates[1].model = gain_model(0.3);
    CHECK_THROWS_AS(validation_cascade(board3, val, cfg), ExhaustionError);
}

TEST_CASE("cascade flags a wrong-delay model through cross-correlation") {
    Rng rng(6);
    const std::size_t n = 4000;
    std::vector<double> u(n), y(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) u[k] = rng.uniform(-1.0, 1.0);
    for (std::size_t k = 2; k < n; ++k) y[k] = u[k - 2] + rng.normal(0.0, 0.002);
    const TimeSeries val(1e-3, {{"u", u}, {"y", y}});

    Candidate truncated = fake_candidate(0, 99.0, 1e-8);
    truncated.model = gain_model(1.0);
    truncated.model->linear.delay = 1; // wrong delay: residuals correlate with the input
    truncated.structure = spec_of(NlFamily::identity, 0, 1, 0, 1);

    Leaderboard board;
    board.output_name = "y";
    board.candidates = {truncated};
    board.best_index = 0;

    CascadeConfig cfg;
    cfg.fit_threshold = 10.0; // keep only the residual checks active
    cfg.transient_discard = 0;
    try {
        validation_cascade(board, val, cfg);
        FAIL("expected exhaustion");
    } catch (const ExhaustionError& e) {
        CHECK(std::string(e.what()).find("residual_crosscorrelation") != std::string::npos);
    }
}

} // TEST_SUITE
