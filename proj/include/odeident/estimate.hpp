#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "odeident/config.hpp"
#include "odeident/numkernel.hpp"
#include "odeident/obsmap.hpp"
#include "odeident/ode.hpp"

namespace odeident {

/// Samples of one trajectory on a uniform grid t_0 + i dt, i = 0..N.
struct ObservationGrid {
    std::vector<double> times;
    std::vector<Vec> values;
    double delta_t = 0.0;
    double noise_sigma = 0.0;
    std::optional<std::uint64_t> seed;

    /// Copies a trajectory; `include_initial = false` drops the t = 0 sample.
    static ObservationGrid from_trajectory(const Trajectory& traj, bool include_initial = true);

    int state_dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }

    /// Checks shapes and spacing and recomputes delta_t.
    void validate(const Tolerances& tol = {});
};

struct EstimationStep {
    Vec alpha;
    double residual = 0.0;
};

struct EstimationResult {
    Vec alpha_hat;
    double residual = 0.0;  // ||y - model(alpha_hat)||_2
    int iterations = 0;
    bool converged = false;
    int jacobian_rank = 0;
    double condition = 0.0;
    bool rank_deficient = false;
    std::vector<EstimationStep> history;
    double step_norm = 0.0;
    double gradient_norm = 0.0;  // scaled, see GaussNewtonOptions::grad_tol
};

struct FdOptions {
    /// Adds ridge * I to the normal equations (as sqrt(ridge) * I rows); 0 disables it.
    double ridge = 0.0;
};

/// Central-difference estimator for systems linear in the parameters:
/// (X(t_{i+1}) - X(t_{i-1})) / (2 dt) = [P_1(X(t_i)) ... P_n(X(t_i))] a for
/// every interior i, solved jointly in the least-squares sense.
EstimationResult fd_linear_estimate(const ObservationGrid& obs, const ParamSystem& sys, const FdOptions& opts = {});

struct GaussNewtonOptions {
    int max_iter = 100;
    /// Converged once ||step|| <= step_tol (1 + ||alpha||) ...
    double step_tol = 1e-10;
    /// ... and ||J^T r|| <= grad_tol max(1, ||J||_F ||y||).
    double grad_tol = 1e-8;
    /// Initial Levenberg-Marquardt damping.
    double damping = 1e-3;
};

/// Damped Gauss-Newton for Phi(alpha) = y_obs. Each trial step solves
/// (J^T J + lambda diag(J^T J)) s = J^T r; lambda halves after a residual
/// decrease and quadruples otherwise.
EstimationResult gauss_newton_invert(const ObservationMap& map, const Vec& y_obs, const Vec& alpha_init,
                                     const GaussNewtonOptions& opts = {});

/// Adds i.i.d. N(0, sigma^2) noise to every value component.
ObservationGrid add_noise(const ObservationGrid& obs, double sigma, std::uint64_t seed);

}  // namespace odeident
