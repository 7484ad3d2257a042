#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "odeident/errors.hpp"
#include "odeident/estimate.hpp"
#include "odeident/linearcase.hpp"

using namespace odeident;

namespace {

ParamSystem decay(double c = 1.0) { return ParamSystem::polynomial_basis(1, {PolyMap{{{Monomial{c, {1}}}}}}); }

ParamSystem logistic(double c = 1.0) {
    return ParamSystem::polynomial_basis(1, {PolyMap{{{Monomial{c, {1}}}}}, PolyMap{{{Monomial{c, {2}}}}}});
}

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

ObservationGrid decay_grid(double dt, int n) {
    ObservationGrid g;
    for (int i = 0; i <= n; ++i) {
        g.times.push_back(i * dt);
        g.values.push_back(v1(std::exp(-0.5 * i * dt)));
    }
    return g;
}

ObservationGrid logistic_grid(double dt, int n) {
    return ObservationGrid::from_trajectory(integrate(logistic(), v2(1.0, -1.0), v1(0.1), n * dt, n, 1e-12));
}

}  // namespace

TEST_CASE("fd estimator on exact exponential samples") {
    const double dt = 0.01;
    const auto res = fd_linear_estimate(decay_grid(dt, 100), decay());
    // Every central difference equals -x_i sinh(dt/2)/dt exactly.
    CHECK(res.alpha_hat(0) == doctest::Approx(-std::sinh(0.5 * dt) / dt).epsilon(1e-10));
    CHECK(std::abs(res.alpha_hat(0) + 0.5) < 5e-5);
    CHECK(res.converged);
    CHECK(res.jacobian_rank == 1);
    CHECK_FALSE(res.rank_deficient);
    CHECK(res.history.size() == 1);
}

TEST_CASE("fd estimator flags collinear regressors") {
    ObservationGrid g;
    for (int i = 0; i <= 10; ++i) {
        g.times.push_back(0.1 * i);
        g.values.push_back(v1(1.0));
    }
    const auto res = fd_linear_estimate(g, logistic());
    CHECK(res.rank_deficient);
    CHECK_FALSE(res.converged);
    CHECK(res.jacobian_rank == 1);
    CHECK(res.alpha_hat.norm() < 1e-12);  // minimum-norm solution of a zero right-hand side
}

TEST_CASE("fd estimator on logistic data is second order") {
    const auto coarse = fd_linear_estimate(logistic_grid(0.01, 500), logistic());
    const auto fine = fd_linear_estimate(logistic_grid(0.005, 1000), logistic());
    const double ec = (coarse.alpha_hat - v2(1.0, -1.0)).cwiseAbs().maxCoeff();
    const double ef = (fine.alpha_hat - v2(1.0, -1.0)).cwiseAbs().maxCoeff();
    CHECK(ec <= 1e-3);
    CHECK(ec / ef > 3.5);
    CHECK(ec / ef < 4.5);
}

TEST_CASE("fd estimator is equivariant under basis scaling") {
    const auto g = logistic_grid(0.02, 200);
    const auto base = fd_linear_estimate(g, logistic());
    for (double c : {3.0, -0.25, 1e3}) {
        const auto scaled = fd_linear_estimate(g, logistic(c));
        CHECK((scaled.alpha_hat * c - base.alpha_hat).norm() <= 1e-10 * base.alpha_hat.norm());
    }
}

TEST_CASE("fd estimator options and preconditions") {
    const auto g = decay_grid(0.01, 100);
    const auto ridge = fd_linear_estimate(g, decay(), FdOptions{10.0});
    CHECK(std::abs(ridge.alpha_hat(0)) < 0.5);

    auto bad = g;
    bad.times[5] += 1e-4;
    CHECK_THROWS_AS(fd_linear_estimate(bad, decay()), PreconditionError);
    CHECK_THROWS_AS(fd_linear_estimate(decay_grid(0.1, 1), decay()), PreconditionError);
    CHECK_THROWS_AS(fd_linear_estimate(g, ParamSystem::matrix_linear(2)), DimensionError);
    const auto cb = ParamSystem::callback(1, 1, [](const Vec& x, const Vec& a) { return Vec(a(0) * x); });
    CHECK_THROWS_AS(fd_linear_estimate(g, cb), PreconditionError);
}

TEST_CASE("gauss-newton: zero residual at the start") {
    const ObservationMap map(decay(), v1(1.0), 0.1, 10);
    const Vec y = phi(map, v1(-0.4));
    const auto res = gauss_newton_invert(map, y, v1(-0.4));
    CHECK(res.converged);
    CHECK(res.iterations <= 1);
    CHECK(res.alpha_hat(0) == -0.4);
}

TEST_CASE("gauss-newton: scalar decay") {
    const ObservationMap map(decay(), v1(1.0), 0.1, 10, 1e-12);
    Vec y(10);
    for (int j = 1; j <= 10; ++j) y(j - 1) = std::exp(-0.5 * 0.1 * j);
    const auto res = gauss_newton_invert(map, y, v1(-0.4));
    CHECK(res.converged);
    CHECK(std::abs(res.alpha_hat(0) + 0.5) < 1e-8);
    for (std::size_t i = 1; i < res.history.size(); ++i) {
        CHECK(res.history[i].residual <= res.history[i - 1].residual);
    }
    CHECK(res.step_norm <= 1e-10 * (1.0 + res.alpha_hat.norm()));
    CHECK(res.gradient_norm <= 1e-8);
}

TEST_CASE("gauss-newton: rotation and a logarithm branch") {
    Mat a0(2, 2);
    a0 << 0.0, 1.0, -1.0, 0.0;
    Vec x0(2);
    x0 << 1.0, 0.7;
    Mat pert(2, 2);
    pert << 0.6, -0.3, 0.2, 0.8;

    const ObservationMap map(ParamSystem::matrix_linear(2), x0, 0.3, 6, 1e-11);
    const Vec y = phi_exact(a0, x0, 0.3, 6);
    const auto res = gauss_newton_invert(map, y, flatten(a0 + 0.05 * pert));
    CHECK(res.converged);
    CHECK((res.alpha_hat - flatten(a0)).cwiseAbs().maxCoeff() < 1e-6);

    // With h = 1 the k = 1 branch produces the same samples.
    const double th = 1.0 + 2.0 * M_PI;
    Mat b(2, 2);
    b << 0.0, th, -th, 0.0;
    const ObservationMap m1(ParamSystem::matrix_linear(2), x0, 1.0, 6, 1e-11);
    const Vec y1 = phi_exact(a0, x0, 1.0, 6);
    const auto rb = gauss_newton_invert(m1, y1, flatten(b + 0.002 * pert));
    CHECK(rb.converged);
    CHECK((rb.alpha_hat - flatten(b)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gauss-newton: budget and divergence") {
    const ObservationMap map(decay(), v1(1.0), 0.1, 10);
    const Vec y = phi(map, v1(-0.5));
    const auto res = gauss_newton_invert(map, y, v1(2.0), GaussNewtonOptions{1, 1e-10, 1e-8, 1e-3});
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 1);

    // x' = a x^2 from x0 = 1 blows up at t = 1/a < 2.
    const auto blowup = ParamSystem::polynomial_basis(1, {PolyMap{{{Monomial{1.0, {2}}}}}});
    const ObservationMap bm(blowup, v1(1.0), 0.5, 4);
    CHECK_THROWS_AS(gauss_newton_invert(bm, Vec::Zero(4), v1(1.0)), DivergenceError);
    CHECK_THROWS_AS(gauss_newton_invert(map, y, v1(std::nan(""))), DomainError);
    CHECK_THROWS_AS(gauss_newton_invert(map, y, v2(1.0, 2.0)), DimensionError);
}

TEST_CASE("add_noise") {
    const auto g = decay_grid(0.01, 2000);
    const auto same = add_noise(g, 0.0, 4);
    for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(same.values[i](0) == g.values[i](0));

    const auto a = add_noise(g, 1e-2, 9);
    const auto b = add_noise(g, 1e-2, 9);
    const auto c = add_noise(g, 1e-2, 10);
    CHECK(a.noise_sigma == 1e-2);
    CHECK(a.seed.value() == 9);
    double diff = 0.0, ss = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        CHECK(a.values[i](0) == b.values[i](0));
        diff += std::abs(a.values[i](0) - c.values[i](0));
        const double e = a.values[i](0) - g.values[i](0);
        mean += e;
        ss += e * e;
    }
    const double n = static_cast<double>(g.values.size());
    CHECK(diff > 0.0);
    CHECK(std::abs(mean / n) < 5e-4);
    CHECK(std::sqrt(ss / n) == doctest::Approx(1e-2).epsilon(0.05));
    CHECK_THROWS_AS(add_noise(g, -1.0, 0), PreconditionError);
}
