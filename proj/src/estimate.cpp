#include "odeident/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "odeident/errors.hpp"
#include "odeident/rng.hpp"

namespace odeident {

namespace {

constexpr std::uint64_t kNoiseStream = 5;
constexpr double kMaxDamping = 1e16;

bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace

ObservationGrid ObservationGrid::from_trajectory(const Trajectory& traj, bool include_initial) {
    ObservationGrid g;
    const std::size_t first = include_initial ? 0 : 1;
    for (std::size_t i = first; i < traj.times.size(); ++i) {
        g.times.push_back(traj.times[i]);
        g.values.push_back(traj.states[i]);
    }
    if (g.times.size() >= 2) g.delta_t = g.times[1] - g.times[0];
    return g;
}

void ObservationGrid::validate(const Tolerances& tol) {
    if (times.size() != values.size()) throw DimensionError("ObservationGrid: times and values differ in length");
    if (times.size() < 2) throw PreconditionError("ObservationGrid: need at least two samples");
    const auto k = values.front().size();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() != k) {
            throw DimensionError("ObservationGrid: sample " + std::to_string(i) + " has inconsistent dimension");
        }
        if (!std::isfinite(times[i]) || !finite(values[i])) {
            throw DomainError("ObservationGrid: non-finite entry at sample " + std::to_string(i));
        }
    }
    const double n = static_cast<double>(times.size() - 1);
    const double dt = (times.back() - times.front()) / n;
    if (!(dt > 0.0)) throw PreconditionError("ObservationGrid: times must be increasing");
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double step = times[i] - times[i - 1];
        if (std::abs(step - dt) > tol.uniform_grid_tol * dt) {
            throw PreconditionError("ObservationGrid: non-uniform spacing at sample " + std::to_string(i));
        }
    }
    delta_t = dt;
}

EstimationResult fd_linear_estimate(const ObservationGrid& obs, const ParamSystem& sys, const FdOptions& opts) {
    if (!sys.linear_in_parameters()) {
        throw PreconditionError("fd_linear_estimate: system is not linear in its parameters");
    }
    if (!(opts.ridge >= 0.0)) throw PreconditionError("fd_linear_estimate: ridge must be >= 0");
    ObservationGrid grid = obs;
    grid.validate();
    if (grid.times.size() < 3) throw PreconditionError("fd_linear_estimate: need at least one interior sample");
    const int k = sys.state_dim();
    const int n = sys.param_dim();
    if (grid.state_dim() != k) throw DimensionError("fd_linear_estimate: observation dimension does not match system");

    const int interior = static_cast<int>(grid.times.size()) - 2;
    const int rows = k * interior + (opts.ridge > 0.0 ? n : 0);
    Mat a = Mat::Zero(rows, n);
    Vec b = Vec::Zero(rows);
    const double inv = 1.0 / (2.0 * grid.delta_t);
    for (int i = 1; i <= interior; ++i) {
        a.middleRows((i - 1) * k, k) = sys.basis_block(grid.values[i]);
        b.segment((i - 1) * k, k) = (grid.values[i + 1] - grid.values[i - 1]) * inv;
    }
    if (opts.ridge > 0.0) a.bottomRows(n) = std::sqrt(opts.ridge) * Mat::Identity(n, n);

    const LeastSquaresResult ls = least_squares(a, b);
    EstimationResult res;
    res.alpha_hat = ls.x;
    res.residual = ls.residual;
    res.iterations = 1;
    res.jacobian_rank = ls.rank;
    res.condition = ls.condition;
    res.rank_deficient = ls.rank_deficient;
    res.converged = !ls.rank_deficient;
    res.history.push_back({ls.x, ls.residual});
    return res;
}

EstimationResult gauss_newton_invert(const ObservationMap& map, const Vec& y_obs, const Vec& alpha_init,
                                     const GaussNewtonOptions& opts) {
    if (alpha_init.size() != map.param_dim()) throw DimensionError("gauss_newton_invert: alpha_init dimension mismatch");
    if (y_obs.size() != map.output_dim()) throw DimensionError("gauss_newton_invert: y_obs dimension mismatch");
    if (!finite(alpha_init) || !finite(y_obs)) throw DomainError("gauss_newton_invert: non-finite input");
    if (opts.max_iter < 1 || !(opts.step_tol > 0.0) || !(opts.grad_tol > 0.0) || !(opts.damping > 0.0)) {
        throw PreconditionError("gauss_newton_invert: options must be positive");
    }

    Vec alpha = alpha_init;
    PhiEval ev;
    try {
        ev = phi_with_jacobian(map, alpha);
    } catch (const IntegrationError& e) {
        throw DivergenceError(std::string("gauss_newton_invert: initial point: ") + e.what(), e.failure_time());
    }
    Vec r = y_obs - ev.value;
    double res = r.norm();
    if (!std::isfinite(res)) throw DivergenceError("gauss_newton_invert: non-finite initial residual", 0.0);

    const double y_norm = y_obs.norm();
    EstimationResult out;
    out.history.push_back({alpha, res});
    double lambda = opts.damping;
    const int n = map.param_dim();

    for (int it = 0; it < opts.max_iter; ++it) {
        const Mat& jac = ev.jacobian;
        const Vec g = jac.transpose() * r;
        out.gradient_norm = g.norm() / std::max(1.0, jac.norm() * y_norm);

        Vec d = jac.colwise().squaredNorm().transpose();
        const double dmax = d.maxCoeff();
        const double floor = dmax > 0.0 ? 1e-12 * dmax : 1.0;
        d = d.cwiseMax(floor);
        Mat aug(jac.rows() + n, n);
        aug.topRows(jac.rows()) = jac;
        aug.bottomRows(n) = (lambda * d).cwiseSqrt().asDiagonal();
        Vec rhs = Vec::Zero(jac.rows() + n);
        rhs.head(jac.rows()) = r;
        const Vec step = least_squares(aug, rhs).x;
        out.step_norm = step.norm();
        out.iterations = it;

        if (out.gradient_norm <= opts.grad_tol && out.step_norm <= opts.step_tol * (1.0 + alpha.norm())) {
            out.converged = true;
            break;
        }

        const Vec trial = alpha + step;
        bool accepted = false;
        PhiEval trial_ev;
        double trial_res = std::numeric_limits<double>::infinity();
        try {
            trial_ev = phi_with_jacobian(map, trial);
            trial_res = (y_obs - trial_ev.value).norm();
            accepted = std::isfinite(trial_res) && trial_res < res;
        } catch (const IntegrationError&) {
            accepted = false;
        }
        out.iterations = it + 1;
        if (accepted) {
            alpha = trial;
            ev = std::move(trial_ev);
            r = y_obs - ev.value;
            res = trial_res;
            out.history.push_back({alpha, res});
            lambda *= 0.5;
        } else {
            lambda *= 4.0;
            if (lambda > kMaxDamping) break;
        }
    }

    out.alpha_hat = alpha;
    out.residual = res;
    const auto sigma = singular_values(ev.jacobian);
    out.jacobian_rank = numerical_rank(sigma, static_cast<int>(ev.jacobian.rows()), n);
    out.rank_deficient = out.jacobian_rank < n;
    out.condition = out.rank_deficient ? std::numeric_limits<double>::infinity() : sigma.front() / sigma.back();
    return out;
}

ObservationGrid add_noise(const ObservationGrid& obs, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw PreconditionError("add_noise: sigma must be >= 0");
    ObservationGrid out = obs;
    out.noise_sigma = sigma;
    out.seed = seed;
    if (sigma == 0.0) return out;
    auto gen = counter_rng(seed, 0, kNoiseStream);
    std::normal_distribution<double> dist(0.0, sigma);
    for (Vec& v : out.values) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += dist(gen);
    }
    return out;
}

}  // namespace odeident
