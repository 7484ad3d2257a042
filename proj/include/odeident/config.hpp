#pragma once

namespace odeident {

/// Every numerical threshold the library uses, in one place.
///
/// Functions that need a tolerance take a `const Tolerances&` defaulting to
/// `Tolerances{}`, so a caller can tighten or loosen a single knob without
/// touching the rest.
struct Tolerances {
    // numkernel
    int eig_max_dim = 12;              // eigenvalues() refuses larger inputs
    double expm_scaled_norm = 0.5;     // scaling-and-squaring target for ||tA||_1
    double expm_max_norm = 700.0;      // beyond this exp(tA) may overflow
    double eig_cluster_rel = 1.5e-8;   // eigenvalue clustering for multiplicity (relative to max(1,|A|))
    double eig_vector_rcond = 1e-6;    // eigenvector matrix with smaller sigma_min/sigma_max counts as defective

    // ode
    double integrator_tol = 1e-10;     // default local error tolerance
    double integrator_tol_min = 1e-14;
    double integrator_tol_max = 1e-3;
    long max_steps = 2'000'000;

    // obsmap
    double certificate_safety = 1.5;
    double lower_bound_margin = 1e-6;  // violation margin, relative to sqrt(beta)
    double second_diff_step = 1e-4;    // relative step for directional Jacobian differences
    int gamma_power_iterations = 3;
    double zeta_rank_tol = 1e-10;
    long zeta_budget = 1'000'000;

    // linearcase
    int alias_k_scan = 16;
    int branch_k_max = 2;
    double alias_frac_tol = 1e-7;      // |Im(dl) h / 2pi - round(.)|
    double alias_real_tol = 1e-9;      // |Re(dl)| relative to max(1, max|l|)
    double branch_imag_tol = 1e-9;     // imaginary residue allowed in a reassembled branch
    double branch_check_tol = 1e-8;    // ||exp(h b) - exp(h a0)||_inf
    double krylov_rank_tol = 1e-10;    // relative singular-value cut for the Krylov matrix
    double jacobian_rank_tol = 1e-8;   // relative singular-value cut for integrated Jacobians
    double det_min_gap = 1e-8;

    // estimate
    double uniform_grid_tol = 1e-9;
};

}  // namespace odeident
