#include "ibrid/metrics.hpp"

#include "ibrid/errors.hpp"
#include "ibrid/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace ibrid;

TEST_SUITE("metrics") {

TEST_CASE("nrmse of an exact model is 100") {
    const std::vector<double> y{0.2, -1.0, 3.7, 0.0};
    CHECK(nrmse_fit(y, y) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("nrmse of the mean predictor is 0") {
    const std::vector<double> y{1.0, 2.0, 3.0, 6.0};
    const std::vector<double> mean(4, 3.0);
    CHECK(nrmse_fit(y, mean) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("nrmse hand-computed example") {
    const std::vector<double> y{1.0, 2.0, 3.0};
    const std::vector<double> yhat{1.0, 2.0, 4.0};
    CHECK(std::abs(nrmse_fit(y, yhat) - 100.0 * (1.0 - 1.0 / std::sqrt(2.0))) <= 1e-9);
}

TEST_CASE("nrmse rejects a constant measured channel") {
    const std::vector<double> y(5, 2.0), yhat{1.0, 2.0, 3.0, 2.0, 2.0};
    CHECK_THROWS_AS(nrmse_fit(y, yhat), ContractError);
}

TEST_CASE("nrmse is invariant under common affine transforms") {
    Rng rng(9);
    std::vector<double> y(40), yhat(40), y2(40), yhat2(40);
    for (std::size_t k = 0; k < 40; ++k) {
        y[k] = rng.uniform(-1.0, 1.0);
        yhat[k] = y[k] + rng.uniform(-0.2, 0.2);
    }
    const double a = -2.7, b = 0.9;
    for (std::size_t k = 0; k < 40; ++k) {
        y2[k] = a * y[k] + b;
        yhat2[k] = a * yhat[k] + b;
    }
    CHECK(nrmse_fit(y2, yhat2) == doctest::Approx(nrmse_fit(y, yhat)).epsilon(1e-10));
}

TEST_CASE("fpe of zero errors is zero") {
    const std::vector<double> e(10, 0.0);
    CHECK(fpe(e, 3) == 0.0);
}

TEST_CASE("fpe hand-computed example") {
    const std::vector<double> e{1.0, -1.0, 1.0, -1.0};
    CHECK(std::abs(fpe(e, 2) - 3.0) <= 1e-9);
}

TEST_CASE("fpe with zero parameters is the plain error covariance determinant") {
    Rng rng(2);
    std::vector<double> e(50);
    for (auto& v : e) v = rng.uniform(-1.0, 1.0);
    double acc = 0.0;
    for (double v : e) acc += v * v;
    CHECK(fpe(e, 0) == doctest::Approx(acc / 50.0).epsilon(1e-12));
}

TEST_CASE("fpe grows strictly with parameter count") {
    Rng rng(4);
    std::vector<double> e(30);
    for (auto& v : e) v = rng.uniform(-1.0, 1.0);
    double prev = fpe(e, 0);
    for (std::size_t np = 1; np < 29; ++np) {
        const double cur = fpe(e, np);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("fpe dominates the covariance determinant with equality only at zero") {
    Rng rng(6);
    std::vector<double> e(25);
    for (auto& v : e) v = rng.uniform(-1.0, 1.0);
    const double det = fpe(e, 0);
    for (std::size_t np = 1; np < 10; ++np) CHECK(fpe(e, np) > det);
}

TEST_CASE("fpe rejects too many parameters") {
    const std::vector<double> e(5, 1.0);
    CHECK_THROWS_AS(fpe(e, 5), ContractError);
    CHECK_THROWS_AS(fpe(e, 9), ContractError);
}

TEST_CASE("matrix form matches the scalar path for one output") {
    Rng rng(8);
    Eigen::MatrixXd e(20, 1);
    std::vector<double> ev(20);
    for (int k = 0; k < 20; ++k) {
        ev[static_cast<std::size_t>(k)] = rng.uniform(-1.0, 1.0);
        e(k, 0) = ev[static_cast<std::size_t>(k)];
    }
    CHECK(fpe(e, 4) == doctest::Approx(fpe(ev, 4)).epsilon(1e-14));
    // and the multi-output determinant degenerates correctly for diagonal errors
    Eigen::MatrixXd e2(20, 2);
    e2.col(0) = e.col(0);
    e2.col(1) = 2.0 * e.col(0); // rank deficient -> det 0
    CHECK(fpe(e2, 4) == doctest::Approx(0.0).epsilon(1e-12));
}

} // TEST_SUITE
