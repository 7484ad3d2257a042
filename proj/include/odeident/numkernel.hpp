#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "odeident/config.hpp"

namespace odeident {

using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Real polynomial with ascending coefficients: c[0] + c[1] x + ... + c[d] x^d.
///
/// Trailing zero coefficients are trimmed on construction, so the leading
/// coefficient is nonzero unless the polynomial is identically zero (in which
/// case `coefficients()` is `{0}` and `degree()` is 0).
class Poly {
public:
    Poly() : coeffs_{0.0} {}
    explicit Poly(std::vector<double> ascending);

    /// Builds a monic polynomial from its roots (complex roots must come in
    /// conjugate pairs; the imaginary residue of the product is dropped).
    static Poly from_roots(const std::vector<Complex>& roots);

    const std::vector<double>& coefficients() const noexcept { return coeffs_; }
    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const noexcept { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }
    double leading() const noexcept { return coeffs_.back(); }

    Poly derivative() const;
    double operator()(double x) const;
    Complex operator()(Complex x) const;

private:
    std::vector<double> coeffs_;
};

/// exp(tA) by scaling and squaring with a diagonal [6/6] Padé approximant.
Mat mat_exp(const Mat& a, double t = 1.0, const Tolerances& tol = {});
CMat mat_exp(const CMat& a, double t = 1.0, const Tolerances& tol = {});

struct EigenDecomposition {
    std::vector<Complex> values;  // sorted by (real, imag), with multiplicity
    CMat vectors;                 // unit columns matching `values`; empty when defective
    bool defective = false;
};

EigenDecomposition eigenvalues(const Mat& a, const Tolerances& tol = {});

/// Roots of c0 + c1 x + c2 x^2 + x^3 by the trigonometric / Cardano formulas.
std::vector<Complex> monic_cubic_roots(double c0, double c1, double c2);

struct LeastSquaresResult {
    Vec x;
    double residual = 0.0;   // ||Ax - b||_2
    int rank = 0;
    double condition = 0.0;  // sigma_max / sigma_min; +inf when rank deficient
    bool rank_deficient = false;
};

/// Minimum-norm least-squares solution via SVD; singular values below
/// max(m, n) * eps * sigma_max are treated as zero.
LeastSquaresResult least_squares(const Mat& a, const Vec& b);

/// Singular values, descending.
std::vector<double> singular_values(const Mat& a);
std::vector<double> singular_values(const CMat& a);

/// Count of singular values above `rel_tol * sigma_max`. A negative `rel_tol`
/// selects the default max(m, n) * eps.
int numerical_rank(const std::vector<double>& sigma, int rows, int cols, double rel_tol = -1.0);

/// Sylvester matrix of (p, q) with coefficients in descending degree: deg q
/// shifted rows of p stacked above deg p shifted rows of q.
Mat sylvester_matrix(const Poly& p, const Poly& q);

/// Determinant of `sylvester_matrix(p, q)`.
double sylvester_resultant(const Poly& p, const Poly& q);

/// Characteristic polynomial det(xI - A), monic, ascending coefficients.
Poly characteristic_polynomial(const Mat& a);

/// Throws DimensionError/DomainError for non-square or non-finite input.
void require_square(const Mat& a, const char* what);
void require_finite(const Mat& a, const char* what);
void require_finite(const Vec& v, const char* what);

}  // namespace odeident
