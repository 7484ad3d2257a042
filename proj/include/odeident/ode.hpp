#pragma once

#include <functional>
#include <vector>

#include "odeident/config.hpp"
#include "odeident/numkernel.hpp"

namespace odeident {

/// coeff * x_1^e_1 * ... * x_k^e_k
struct Monomial {
    double coeff = 0.0;
    std::vector<int> exponents;
};

/// A polynomial map R^k -> R^k; `components[r]` is the sum of monomials of
/// output coordinate r.
struct PolyMap {
    std::vector<std::vector<Monomial>> components;
};

/// f(x, a) together with its exact (or, for callbacks, approximate) partials.
struct FieldEval {
    Vec f;
    Mat dfdx;  // k x k
    Mat dfda;  // k x n
};

enum class Species { PolynomialBasis, MatrixLinear, Callback };

const char* to_string(Species s);

/// Parameterized vector field f(x, a) on R^k with parameters in R^n.
///
/// * PolynomialBasis: f(x, a) = sum_i a_i P_i(x); every P_i is a nonzero
///   polynomial map.
/// * MatrixLinear: f(x, a) = A x with A the k x k matrix whose row-major
///   entries are a (so n = k^2).
/// * Callback: user-supplied f; partials default to central finite
///   differences and `exact_derivatives()` is false.
class ParamSystem {
public:
    using FieldFn = std::function<Vec(const Vec& x, const Vec& alpha)>;
    using JacobianFn = std::function<Mat(const Vec& x, const Vec& alpha)>;

    static ParamSystem polynomial_basis(int state_dim, std::vector<PolyMap> basis);
    static ParamSystem matrix_linear(int state_dim);
    static ParamSystem callback(int state_dim, int param_dim, FieldFn f, JacobianFn dfdx = {}, JacobianFn dfda = {});

    int state_dim() const noexcept { return k_; }
    int param_dim() const noexcept { return n_; }
    Species species() const noexcept { return species_; }
    bool exact_derivatives() const noexcept;
    bool linear_in_parameters() const noexcept { return species_ != Species::Callback; }
    const std::vector<PolyMap>& basis() const noexcept { return basis_; }

    Vec field(const Vec& x, const Vec& alpha) const;
    FieldEval evaluate(const Vec& x, const Vec& alpha) const;

    /// k x n block [P_1(x) ... P_n(x)] with f(x, a) = block * a. Only for
    /// species that are linear in the parameters.
    Mat basis_block(const Vec& x) const;

    /// The MatrixLinear field rewritten as an explicit polynomial basis
    /// (P_(i,j)(x) = x_j e_i); other species are returned unchanged.
    ParamSystem as_polynomial_basis() const;

private:
    ParamSystem() = default;
    void check_dims(const Vec& x, const Vec& alpha) const;

    Species species_ = Species::MatrixLinear;
    int k_ = 0;
    int n_ = 0;
    std::vector<PolyMap> basis_;
    FieldFn f_;
    JacobianFn dfdx_;
    JacobianFn dfda_;
};

/// Integrated states on the uniform grid t_j = j h, j = 0..samples, with
/// h = t_end / samples. Index 0 is the initial condition.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    double integrator_tol = 0.0;
};

/// Trajectory plus Z(t_j) = dX(t_j)/da (k x n); Z at index 0 is zero.
struct SensitivityBundle {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Mat> sensitivities;
    double integrator_tol = 0.0;
    bool exact_derivatives = true;
};

/// Adaptive Dormand-Prince 5(4) integration. Steps are clipped so every grid
/// point is hit exactly; the result is bit-reproducible for fixed inputs.
Trajectory integrate(const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end, int samples,
                     double tol = 1e-10, const Tolerances& cfg = {});

/// Jointly integrates the state and the variational equation
/// dZ/dt = df/dx Z + df/da, Z(0) = 0, as one augmented system of size k + k n.
SensitivityBundle integrate_with_sensitivity(const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end,
                                             int samples, double tol = 1e-10, const Tolerances& cfg = {});

/// Classical fixed-step RK4; returns X(t_end) after `steps` equal steps.
Vec integrate_rk4(const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end, int steps);

}  // namespace odeident
