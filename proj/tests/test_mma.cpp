#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "buckopt/mma.hpp"
#include "doctest.h"

using namespace buckopt;

TEST_CASE("mma solves svanberg's five-variable cantilever to the published optimum") {
    // minimize 0.0624 (x1+..+x5) s.t. 61/x1^3 + 37/x2^3 + 19/x3^3 + 7/x4^3
    // + 1/x5^3 <= 1; known optimum x* = (6.016, 5.309, 4.494, 3.502, 2.153)
    const int n = 5;
    Mma mma(n, 1, 1.0);  // classic test runs without an extra move limit
    VectorXd x = VectorXd::Constant(n, 5.0);
    VectorXd xmin = VectorXd::Constant(n, 1.0), xmax = VectorXd::Constant(n, 10.0);
    const double c[5] = {61, 37, 19, 7, 1};

    for (int it = 0; it < 60; it++) {
        VectorXd df0 = VectorXd::Constant(n, 0.0624);
        double gval = -1.0;
        VectorXd dg(n);
        for (int i = 0; i < n; i++) {
            gval += c[i] / std::pow(x(i), 3);
            dg(i) = -3.0 * c[i] / std::pow(x(i), 4);
        }
        Eigen::MatrixXd dgm = dg.transpose();
        VectorXd g(1);
        g(0) = gval;
        x = mma.update(x, df0, g, dgm, xmin, xmax);
    }
    const double xstar[5] = {6.016, 5.309, 4.494, 3.502, 2.153};
    for (int i = 0; i < n; i++) CHECK(x(i) == doctest::Approx(xstar[i]).epsilon(2e-3));
    CHECK(0.0624 * x.sum() == doctest::Approx(1.340).epsilon(1e-3));

    // optimum is feasible and the constraint is active
    double gval = -1.0;
    for (int i = 0; i < n; i++) gval += c[i] / std::pow(x(i), 3);
    CHECK(gval <= 1e-6);
    CHECK(gval >= -1e-3);
}

TEST_CASE("mma respects bounds and the move limit") {
    const int n = 3;
    const double move = 0.05;
    Mma mma(n, 1, move);
    VectorXd x(n);
    x << 0.5, 0.9, 0.1;
    VectorXd xmin = VectorXd::Zero(n), xmax = VectorXd::Ones(n);
    // steep objective pushing everything to the upper bound
    VectorXd df0 = VectorXd::Constant(n, -100.0);
    VectorXd g(1);
    g(0) = -1.0;  // inactive constraint
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(1, n);

    VectorXd x1 = mma.update(x, df0, g, dg, xmin, xmax);
    for (int i = 0; i < n; i++) {
        CHECK(x1(i) >= xmin(i));
        CHECK(x1(i) <= xmax(i));
        CHECK(std::abs(x1(i) - x(i)) <= move * (xmax(i) - xmin(i)) + 1e-12);
        CHECK(x1(i) > x(i));  // objective pulls upward
    }
}

TEST_CASE("mma converges on a smooth bound-constrained quadratic") {
    // minimize sum (x_i - t_i)^2 with inactive constraint; optimum x = t
    const int n = 4;
    Mma mma(n, 1, 0.2);
    VectorXd t(n);
    t << 0.3, 0.8, 0.55, 0.15;
    VectorXd x = VectorXd::Constant(n, 0.5);
    VectorXd xmin = VectorXd::Zero(n), xmax = VectorXd::Ones(n);
    for (int it = 0; it < 80; it++) {
        VectorXd df0 = 2.0 * (x - t);
        VectorXd g(1);
        g(0) = -0.5;
        Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(1, n);
        x = mma.update(x, df0, g, dg, xmin, xmax);
    }
    for (int i = 0; i < n; i++) CHECK(x(i) == doctest::Approx(t(i)).epsilon(5e-3));
}

TEST_CASE("mma drives a violated linear constraint feasible") {
    // minimize -sum x s.t. mean(x) <= 0.4
    const int n = 6;
    Mma mma(n, 1, 0.1);
    VectorXd x = VectorXd::Constant(n, 0.9);
    VectorXd xmin = VectorXd::Zero(n), xmax = VectorXd::Ones(n);
    for (int it = 0; it < 60; it++) {
        VectorXd df0 = VectorXd::Constant(n, -1.0);
        VectorXd g(1);
        g(0) = x.mean() / 0.4 - 1.0;
        Eigen::MatrixXd dg = Eigen::MatrixXd::Constant(1, n, 1.0 / (0.4 * n));
        x = mma.update(x, df0, g, dg, xmin, xmax);
    }
    CHECK(x.mean() <= 0.4 + 1e-4);
    CHECK(x.mean() >= 0.4 - 5e-3);  // active at the optimum
}

TEST_CASE("two constraints: volume and symmetry-gap toy problem") {
    // maximize x1 + 2 x2 s.t. x1 + x2 <= 1, x2 - x1 <= 0.2
    const int n = 2;
    Mma mma(n, 2, 0.2);
    VectorXd x(n);
    x << 0.2, 0.2;
    VectorXd xmin = VectorXd::Zero(n), xmax = VectorXd::Ones(n);
    for (int it = 0; it < 80; it++) {
        VectorXd df0(n);
        df0 << -1.0, -2.0;
        VectorXd g(2);
        g(0) = x(0) + x(1) - 1.0;
        g(1) = x(1) - x(0) - 0.2;
        Eigen::MatrixXd dg(2, n);
        dg << 1, 1, -1, 1;
        x = mma.update(x, df0, g, dg, xmin, xmax);
    }
    CHECK(x(0) == doctest::Approx(0.4).epsilon(2e-2));
    CHECK(x(1) == doctest::Approx(0.6).epsilon(2e-2));
}
