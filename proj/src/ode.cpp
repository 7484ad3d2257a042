#include "odeident/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odeident/errors.hpp"

namespace odeident {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

double eval_monomial(const Monomial& m, const Vec& x) {
    double v = m.coeff;
    for (Eigen::Index j = 0; j < x.size(); ++j) v *= ipow(x(j), m.exponents[j]);
    return v;
}

// d/dx_j of the monomial.
double eval_monomial_partial(const Monomial& m, const Vec& x, Eigen::Index j) {
    const int ej = m.exponents[j];
    if (ej == 0) return 0.0;
    double v = m.coeff * ej;
    for (Eigen::Index i = 0; i < x.size(); ++i) v *= ipow(x(i), i == j ? ej - 1 : m.exponents[i]);
    return v;
}

Mat central_difference(const std::function<Vec(const Vec&)>& g, const Vec& at, Eigen::Index rows) {
    const double h0 = std::cbrt(kEps);
    Mat jac(rows, at.size());
    for (Eigen::Index j = 0; j < at.size(); ++j) {
        const double step = h0 * std::max(1.0, std::abs(at(j)));
        Vec plus = at, minus = at;
        plus(j) += step;
        minus(j) -= step;
        jac.col(j) = (g(plus) - g(minus)) / (plus(j) - minus(j));
    }
    return jac;
}

// Dormand-Prince 5(4) tableau (autonomous fields, so the nodes c_i are unused).
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

using Rhs = std::function<Vec(const Vec&)>;

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double tol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = tol + tol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        const double r = err(i) / sc;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
}

double initial_step(const Rhs& rhs, const Vec& y0, const Vec& f0, double tol, double limit) {
    auto scaled = [&](const Vec& v) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = tol + tol * std::abs(y0(i));
            acc += (v(i) / sc) * (v(i) / sc);
        }
        return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, v.size())));
    };
    const double d0 = scaled(y0), d1 = scaled(f0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, limit);
    const Vec y1 = y0 + h0 * f0;
    const Vec f1 = rhs(y1);
    const double d2 = scaled(f1 - f0) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    double h = std::min(100.0 * h0, h1);
    if (!std::isfinite(h) || h <= 0.0) h = 1e-6;
    return std::min(h, limit);
}

// Integrates y' = rhs(y) from y0 and returns y at t_j = j * t_end / samples,
// j = 0..samples.
std::vector<Vec> dopri5_grid(const Rhs& rhs, const Vec& y0, double t_end, int samples, double tol,
                             const Tolerances& cfg) {
    std::vector<Vec> out;
    out.reserve(samples + 1);
    out.push_back(y0);

    const double grid = t_end / samples;
    double t = 0.0;
    Vec y = y0;
    Vec k1 = rhs(y);
    if (!k1.allFinite()) throw DivergenceError("integrate: non-finite vector field at the initial state", 0.0);
    double h = initial_step(rhs, y, k1, tol, grid);
    long steps = 0;
    bool last_nonfinite = false;

    for (int j = 1; j <= samples; ++j) {
        const double target = (j == samples) ? t_end : grid * j;
        while (t < target) {
            if (++steps > cfg.max_steps) throw IntegrationError("integrate: step budget exhausted", t);
            const double hmin = 16.0 * kEps * std::max(1.0, std::abs(t));
            if (h < hmin) {
                if (last_nonfinite) throw DivergenceError("integrate: solution diverged", t);
                throw IntegrationError("integrate: step size underflow", t);
            }
            bool clipped = false;
            double step = h;
            if (t + step >= target - hmin) {
                step = target - t;
                clipped = true;
            }

            const Vec k2 = rhs(y + step * (a21 * k1));
            const Vec k3 = rhs(y + step * (a31 * k1 + a32 * k2));
            const Vec k4 = rhs(y + step * (a41 * k1 + a42 * k2 + a43 * k3));
            const Vec k5 = rhs(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const Vec k6 = rhs(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const Vec ynew = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const Vec k7 = rhs(ynew);
            const Vec err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double en = error_norm(err, y, ynew, tol);

            if (!std::isfinite(en) || !ynew.allFinite() || !k7.allFinite()) {
                last_nonfinite = true;
                h = 0.2 * step;
                continue;
            }
            last_nonfinite = false;
            const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            if (en <= 1.0) {
                t = clipped ? target : t + step;
                y = ynew;
                k1 = k7;
                // A clipped step says nothing about the natural step size, so
                // only let it shrink the proposal.
                if (!clipped) {
                    h = step * factor;
                } else if (factor < 1.0) {
                    h = std::min(h, step * factor);
                }
            } else {
                h = step * std::min(1.0, factor);
            }
        }
        out.push_back(y);
    }
    return out;
}

void check_integration_args(const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end, int samples,
                            double tol, const Tolerances& cfg) {
    if (alpha.size() != sys.param_dim() || x0.size() != sys.state_dim()) {
        throw DimensionError("integrate: expected alpha of size " + std::to_string(sys.param_dim()) +
                             " and x0 of size " + std::to_string(sys.state_dim()));
    }
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw PreconditionError("integrate: t_end must be positive");
    if (samples < 1) throw PreconditionError("integrate: samples must be >= 1");
    if (!(tol >= cfg.integrator_tol_min && tol <= cfg.integrator_tol_max)) {
        throw PreconditionError("integrate: tol must lie in [1e-14, 1e-3]");
    }
    require_finite(alpha, "integrate");
    require_finite(x0, "integrate");
}

std::vector<double> grid_times(double t_end, int samples) {
    std::vector<double> times(samples + 1);
    const double grid = t_end / samples;
    for (int j = 0; j < samples; ++j) times[j] = grid * j;
    times[samples] = t_end;
    return times;
}

}  // namespace

const char* to_string(Species s) {
    switch (s) {
        case Species::PolynomialBasis: return "polynomial_basis";
        case Species::MatrixLinear: return "matrix_linear";
        case Species::Callback: return "callback";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// ParamSystem

ParamSystem ParamSystem::polynomial_basis(int state_dim, std::vector<PolyMap> basis) {
    if (state_dim < 1) throw PreconditionError("polynomial_basis: state_dim must be >= 1");
    if (basis.empty()) throw PreconditionError("polynomial_basis: at least one basis map required");
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto& p = basis[i];
        if (static_cast<int>(p.components.size()) != state_dim) {
            throw DimensionError("polynomial_basis: P" + std::to_string(i + 1) + " has " +
                                 std::to_string(p.components.size()) + " components, expected " +
                                 std::to_string(state_dim));
        }
        bool nonzero = false;
        for (const auto& comp : p.components) {
            for (const auto& m : comp) {
                if (static_cast<int>(m.exponents.size()) != state_dim) {
                    throw DimensionError("polynomial_basis: monomial exponent length must equal state_dim");
                }
                if (std::any_of(m.exponents.begin(), m.exponents.end(), [](int e) { return e < 0; })) {
                    throw DomainError("polynomial_basis: negative exponent");
                }
                if (!std::isfinite(m.coeff)) throw DomainError("polynomial_basis: non-finite coefficient");
                nonzero = nonzero || m.coeff != 0.0;
            }
        }
        if (!nonzero) throw PreconditionError("polynomial_basis: P" + std::to_string(i + 1) + " is identically zero");
    }
    ParamSystem s;
    s.species_ = Species::PolynomialBasis;
    s.k_ = state_dim;
    s.n_ = static_cast<int>(basis.size());
    s.basis_ = std::move(basis);
    return s;
}

ParamSystem ParamSystem::matrix_linear(int state_dim) {
    if (state_dim < 1) throw PreconditionError("matrix_linear: state_dim must be >= 1");
    ParamSystem s;
    s.species_ = Species::MatrixLinear;
    s.k_ = state_dim;
    s.n_ = state_dim * state_dim;
    return s;
}

ParamSystem ParamSystem::callback(int state_dim, int param_dim, FieldFn f, JacobianFn dfdx, JacobianFn dfda) {
    if (state_dim < 1 || param_dim < 1) throw PreconditionError("callback: dimensions must be >= 1");
    if (!f) throw PreconditionError("callback: field function required");
    ParamSystem s;
    s.species_ = Species::Callback;
    s.k_ = state_dim;
    s.n_ = param_dim;
    s.f_ = std::move(f);
    s.dfdx_ = std::move(dfdx);
    s.dfda_ = std::move(dfda);
    return s;
}

bool ParamSystem::exact_derivatives() const noexcept {
    return species_ != Species::Callback || (dfdx_ && dfda_);
}

void ParamSystem::check_dims(const Vec& x, const Vec& alpha) const {
    if (x.size() != k_ || alpha.size() != n_) {
        throw DimensionError("ParamSystem: expected x of size " + std::to_string(k_) + " and alpha of size " +
                             std::to_string(n_) + ", got " + std::to_string(x.size()) + " and " +
                             std::to_string(alpha.size()));
    }
}

Mat ParamSystem::basis_block(const Vec& x) const {
    if (x.size() != k_) throw DimensionError("basis_block: state dimension mismatch");
    Mat t = Mat::Zero(k_, n_);
    switch (species_) {
        case Species::PolynomialBasis:
            for (int i = 0; i < n_; ++i) {
                for (int r = 0; r < k_; ++r) {
                    double v = 0.0;
                    for (const auto& m : basis_[i].components[r]) v += eval_monomial(m, x);
                    t(r, i) = v;
                }
            }
            break;
        case Species::MatrixLinear:
            for (int r = 0; r < k_; ++r) {
                for (int j = 0; j < k_; ++j) t(r, r * k_ + j) = x(j);
            }
            break;
        case Species::Callback:
            throw PreconditionError("basis_block: callback systems are not linear in the parameters");
    }
    return t;
}

Vec ParamSystem::field(const Vec& x, const Vec& alpha) const {
    check_dims(x, alpha);
    switch (species_) {
        case Species::PolynomialBasis: return basis_block(x) * alpha;
        case Species::MatrixLinear: {
            const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
                alpha.data(), k_, k_);
            return a * x;
        }
        case Species::Callback: {
            Vec f = f_(x, alpha);
            if (f.size() != k_) throw DimensionError("callback: field returned wrong dimension");
            return f;
        }
    }
    return {};
}

FieldEval ParamSystem::evaluate(const Vec& x, const Vec& alpha) const {
    check_dims(x, alpha);
    FieldEval out;
    switch (species_) {
        case Species::PolynomialBasis: {
            out.dfda = basis_block(x);
            out.f = out.dfda * alpha;
            out.dfdx = Mat::Zero(k_, k_);
            for (int i = 0; i < n_; ++i) {
                if (alpha(i) == 0.0) continue;
                for (int r = 0; r < k_; ++r) {
                    for (const auto& m : basis_[i].components[r]) {
                        for (int j = 0; j < k_; ++j) out.dfdx(r, j) += alpha(i) * eval_monomial_partial(m, x, j);
                    }
                }
            }
            break;
        }
        case Species::MatrixLinear: {
            out.dfdx = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                alpha.data(), k_, k_);
            out.f = out.dfdx * x;
            out.dfda = basis_block(x);
            break;
        }
        case Species::Callback: {
            out.f = field(x, alpha);
            out.dfdx = dfdx_ ? dfdx_(x, alpha) : central_difference([&](const Vec& y) { return f_(y, alpha); }, x, k_);
            out.dfda = dfda_ ? dfda_(x, alpha) : central_difference([&](const Vec& a) { return f_(x, a); }, alpha, k_);
            if (out.dfdx.rows() != k_ || out.dfdx.cols() != k_ || out.dfda.rows() != k_ || out.dfda.cols() != n_) {
                throw DimensionError("callback: Jacobian returned wrong dimensions");
            }
            break;
        }
    }
    return out;
}

ParamSystem ParamSystem::as_polynomial_basis() const {
    if (species_ != Species::MatrixLinear) return *this;
    std::vector<PolyMap> basis;
    for (int i = 0; i < k_; ++i) {
        for (int j = 0; j < k_; ++j) {
            PolyMap p;
            p.components.resize(k_);
            Monomial m;
            m.coeff = 1.0;
            m.exponents.assign(k_, 0);
            m.exponents[j] = 1;
            p.components[i].push_back(m);
            basis.push_back(std::move(p));
        }
    }
    return polynomial_basis(k_, std::move(basis));
}

// ---------------------------------------------------------------------------
// Integration

Trajectory integrate(const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end, int samples, double tol,
                     const Tolerances& cfg) {
    check_integration_args(sys, alpha, x0, t_end, samples, tol, cfg);
    const Rhs rhs = [&](const Vec& y) { return sys.field(y, alpha); };
    Trajectory out;
    out.states = dopri5_grid(rhs, x0, t_end, samples, tol, cfg);
    out.times = grid_times(t_end, samples);
    out.integrator_tol = tol;
    return out;
}

SensitivityBundle integrate_with_sensitivity(const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end,
                                             int samples, double tol, const Tolerances& cfg) {
    check_integration_args(sys, alpha, x0, t_end, samples, tol, cfg);
    const Eigen::Index k = sys.state_dim();
    const Eigen::Index n = sys.param_dim();

    // Augmented state [x; vec(Z)], Z stored column-major.
    const Rhs rhs = [&](const Vec& y) {
        const Vec x = y.head(k);
        const FieldEval fe = sys.evaluate(x, alpha);
        const Eigen::Map<const Mat> z(y.data() + k, k, n);
        Vec dy(k + k * n);
        dy.head(k) = fe.f;
        Eigen::Map<Mat>(dy.data() + k, k, n) = fe.dfdx * z + fe.dfda;
        return dy;
    };
    Vec y0 = Vec::Zero(k + k * n);
    y0.head(k) = x0;

    const auto states = dopri5_grid(rhs, y0, t_end, samples, tol, cfg);
    SensitivityBundle out;
    out.times = grid_times(t_end, samples);
    out.integrator_tol = tol;
    out.exact_derivatives = sys.exact_derivatives();
    out.states.reserve(states.size());
    out.sensitivities.reserve(states.size());
    for (const Vec& y : states) {
        out.states.push_back(y.head(k));
        out.sensitivities.push_back(Eigen::Map<const Mat>(y.data() + k, k, n));
    }
    return out;
}

Vec integrate_rk4(const ParamSystem& sys, const Vec& alpha, const Vec& x0, double t_end, int steps) {
    if (steps < 1) throw PreconditionError("integrate_rk4: steps must be >= 1");
    const double h = t_end / steps;
    Vec x = x0;
    for (int s = 0; s < steps; ++s) {
        const Vec k1 = sys.field(x, alpha);
        const Vec k2 = sys.field(x + 0.5 * h * k1, alpha);
        const Vec k3 = sys.field(x + 0.5 * h * k2, alpha);
        const Vec k4 = sys.field(x + h * k3, alpha);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) throw DivergenceError("integrate_rk4: solution diverged", h * (s + 1));
    }
    return x;
}

}  // namespace odeident
