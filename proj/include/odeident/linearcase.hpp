#pragma once

#include <optional>
#include <vector>

#include "odeident/config.hpp"
#include "odeident/numkernel.hpp"

namespace odeident {

// Exact analysis of the linear system x' = A x, whose observation map is
// Phi(A) = (e^{hA} x0, e^{2hA} x0, ..., e^{mhA} x0).

/// l_i - l_j = 2 pi i k / h, oriented so that k >= 0.
struct AliasingPair {
    int i = 0;
    int j = 0;
    int k = 0;
};

struct DegeneracyReport {
    std::vector<Complex> eigenvalues;
    bool defective = false;

    /// Sylvester resultant R(P, P') of the characteristic polynomial.
    double discriminant = 0.0;
    /// Displayed closed forms, n = 2: (a11 - a22)^2 + 4 a12 a21;
    /// n = 3: a3 (4 a1^3 - 18 a1 a2 + 27 a3) + a2^2 (4 a2 - a1^2).
    std::optional<double> discriminant_closed_form;
    /// discriminant == closed_form_sign * discriminant_closed_form (-1 for n = 2, +1 for n = 3).
    int closed_form_sign = 1;
    bool closed_form_agrees = true;

    bool double_eigenvalue = false;
    std::vector<AliasingPair> aliasing_pairs;
    /// e^{hA} has simple eigenvalues.
    bool in_set_A = true;

    /// Numerical rank of [x0, C x0, ..., C^{n-1} x0], C = e^{hA}.
    int krylov_rank = 0;
    bool x0_in_E = false;
    double h = 0.0;
};

/// (a11 - a22)^2 + 4 a12 a21 for a 2 x 2 matrix.
double discriminant_closed_form_2x2(const Mat& a);
/// Coefficients of det(lI - A) = l^3 - a1 l^2 + a2 l - a3 for a 3 x 3 matrix.
struct CubicInvariants {
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;
};
CubicInvariants cubic_invariants(const Mat& a);
double discriminant_closed_form_3x3(const Mat& a);

/// Scale against which |discriminant| is judged: max(1, ||A||_F)^{n(n-1)}.
double discriminant_scale(const Mat& a);

DegeneracyReport degeneracy_report(const Mat& alpha, const Vec& x0, double h, const Tolerances& tol = {});

/// Real solutions b of e^{hb} = e^{h a0} obtained by shifting each complex
/// conjugate eigenvalue pair by +-2 pi i k / h, |k| <= k_max.
struct BranchSet {
    Mat base;
    double h = 0.0;
    std::vector<Mat> branches;
    /// Per branch, the shift k applied to each conjugate pair (empty for real spectra).
    std::vector<std::vector<int>> shifts;
    int k_range = 0;
};

BranchSet log_branches(const Mat& alpha0, double h, int k_max, const Tolerances& tol = {});

struct ExpDifferenceDeterminant {
    Complex numeric;
    Complex closed_form;
    /// (-1)^{n(n-1)/2}; the product over i < j of (e^{l_i} - e^{l_j}) differs
    /// from the Vandermonde determinant by this sign.
    int printed_sign = 1;
    Complex closed_form_as_printed() const { return static_cast<double>(printed_sign) * closed_form; }
};

/// Determinant of the n x n matrix with first column e^{j l_1} and column
/// i > 1 entries (e^{j l_1} - e^{j l_i}) / (l_1 - l_i), j = 1..n, next to its
/// closed form (-1)^{n-1} e^{l_1 + ... + l_n} V(e^{l_1}, ..., e^{l_n}) / prod_{i>1}(l_1 - l_i).
ExpDifferenceDeterminant exp_difference_determinant(const std::vector<Complex>& lambda, const Tolerances& tol = {});

/// Stacked e^{jhA} x0, j = 1..m (sample-major, like `phi`).
Vec phi_exact(const Mat& alpha, const Vec& x0, double h, int m);

/// d/dA of `phi_exact` (columns in row-major parameter order), from the
/// block-triangular exponential exp([[A, E_ij], [0, A]]).
Mat phi_exact_jacobian(const Mat& alpha, const Vec& x0, double h, int m);

struct FullRankCheck {
    int rank = 0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    bool full = false;
};

/// Rank of the k^2-column Jacobian of A -> Phi(A) at A = alpha0, computed
/// from integrated sensitivities of the MatrixLinear system.
FullRankCheck full_rank_check(const Mat& alpha0, const Vec& x0, double h, int m, double integrator_tol = 1e-10,
                              const Tolerances& tol = {});

/// Row-major flattening A -> a used by the MatrixLinear species.
Vec flatten(const Mat& a);
Mat unflatten(const Vec& a, int k);

}  // namespace odeident
