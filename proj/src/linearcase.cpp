#include "odeident/linearcase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odeident/errors.hpp"
#include "odeident/obsmap.hpp"
#include "odeident/ode.hpp"

namespace odeident {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

bool has_repeated(const std::vector<Complex>& values, double radius) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t j = i + 1; j < values.size(); ++j) {
            if (std::abs(values[i] - values[j]) <= radius) return true;
        }
    }
    return false;
}

double max_abs(const std::vector<Complex>& values) {
    double m = 0.0;
    for (const Complex& v : values) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace

Vec flatten(const Mat& a) {
    Vec v(a.size());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) v(i * a.cols() + j) = a(i, j);
    }
    return v;
}

Mat unflatten(const Vec& a, int k) {
    if (a.size() != static_cast<Eigen::Index>(k) * k) throw DimensionError("unflatten: expected k^2 entries");
    Mat m(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) m(i, j) = a(i * k + j);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Discriminants

double discriminant_closed_form_2x2(const Mat& a) {
    if (a.rows() != 2 || a.cols() != 2) throw DimensionError("discriminant_closed_form_2x2: expected 2x2");
    const double d = a(0, 0) - a(1, 1);
    return d * d + 4.0 * a(0, 1) * a(1, 0);
}

CubicInvariants cubic_invariants(const Mat& a) {
    if (a.rows() != 3 || a.cols() != 3) throw DimensionError("cubic_invariants: expected 3x3");
    CubicInvariants c;
    c.a1 = a.trace();
    c.a2 = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) + (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) +
           (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1));
    c.a3 = a.determinant();
    return c;
}

double discriminant_closed_form_3x3(const Mat& a) {
    const auto [a1, a2, a3] = cubic_invariants(a);
    return a3 * (4.0 * a1 * a1 * a1 - 18.0 * a1 * a2 + 27.0 * a3) + a2 * a2 * (4.0 * a2 - a1 * a1);
}

double discriminant_scale(const Mat& a) {
    const double n = static_cast<double>(a.rows());
    return std::pow(std::max(1.0, a.norm()), n * (n - 1.0));
}

// ---------------------------------------------------------------------------
// Degeneracy report

DegeneracyReport degeneracy_report(const Mat& alpha, const Vec& x0, double h, const Tolerances& tol) {
    require_square(alpha, "degeneracy_report");
    require_finite(alpha, "degeneracy_report");
    const int n = static_cast<int>(alpha.rows());
    if (x0.size() != n) throw DimensionError("degeneracy_report: x0 dimension mismatch");
    if (!(h > 0.0)) throw PreconditionError("degeneracy_report: h must be positive");

    DegeneracyReport rep;
    rep.h = h;
    const EigenDecomposition ed = eigenvalues(alpha, tol);
    rep.eigenvalues = ed.values;
    rep.defective = ed.defective;

    if (n >= 2) {
        const Poly p = characteristic_polynomial(alpha);
        rep.discriminant = sylvester_resultant(p, p.derivative());
    } else {
        rep.discriminant = 1.0;  // resultant of a linear polynomial and its (unit) derivative
    }
    if (n == 2) {
        rep.discriminant_closed_form = discriminant_closed_form_2x2(alpha);
        rep.closed_form_sign = -1;
    } else if (n == 3) {
        rep.discriminant_closed_form = discriminant_closed_form_3x3(alpha);
        rep.closed_form_sign = 1;
    }
    const double scale = discriminant_scale(alpha);
    if (rep.discriminant_closed_form) {
        const double cf = rep.closed_form_sign * *rep.discriminant_closed_form;
        const double gap = std::abs(rep.discriminant - cf);
        rep.closed_form_agrees = gap <= 1e-8 * std::max(std::abs(rep.discriminant), std::abs(cf)) + 1e-12 * scale;
    }

    const double lscale = std::max(1.0, max_abs(rep.eigenvalues));
    const double radius = tol.eig_cluster_rel * std::max(1.0, alpha.norm());
    rep.double_eigenvalue = ed.defective || has_repeated(ed.values, radius) ||
                            (n >= 2 && std::abs(rep.discriminant) <= 1e-14 * scale);

    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const Complex d = ed.values[i] - ed.values[j];
            if (std::abs(d.real()) >= tol.alias_real_tol * lscale) continue;
            const double kr = d.imag() * h / kTwoPi;
            const double kk = std::round(kr);
            // k = 0 is a repeated eigenvalue, reported through double_eigenvalue.
            if (kk == 0.0 || std::abs(kr - kk) >= tol.alias_frac_tol || std::abs(kk) > tol.alias_k_scan) continue;
            AliasingPair ap{i, j, static_cast<int>(kk)};
            if (ap.k < 0) {
                std::swap(ap.i, ap.j);
                ap.k = -ap.k;
            }
            rep.aliasing_pairs.push_back(ap);
        }
    }
    rep.in_set_A = !rep.double_eigenvalue && rep.aliasing_pairs.empty();

    const Mat c = mat_exp(alpha, h, tol);
    Mat krylov(n, n);
    Vec v = x0;
    for (int j = 0; j < n; ++j) {
        const double nv = v.norm();
        krylov.col(j) = nv > 0.0 ? Vec(v / nv) : Vec::Zero(n);
        v = c * v;
    }
    rep.krylov_rank = numerical_rank(singular_values(krylov), n, n, tol.krylov_rank_tol);
    rep.x0_in_E = rep.krylov_rank < n;
    return rep;
}

// ---------------------------------------------------------------------------
// Logarithm branches

BranchSet log_branches(const Mat& alpha0, double h, int k_max, const Tolerances& tol) {
    require_square(alpha0, "log_branches");
    require_finite(alpha0, "log_branches");
    if (!(h > 0.0)) throw PreconditionError("log_branches: h must be positive");
    if (k_max < 0) throw PreconditionError("log_branches: k_max must be >= 0");
    const int n = static_cast<int>(alpha0.rows());

    const EigenDecomposition ed = eigenvalues(alpha0, tol);
    if (ed.defective) throw DefectiveMatrix("log_branches: alpha0 is defective (nontrivial Jordan block)");
    if (has_repeated(ed.values, tol.eig_cluster_rel * std::max(1.0, alpha0.norm()))) {
        throw PreconditionError("log_branches: alpha0 must have simple eigenvalues");
    }

    BranchSet out;
    out.base = alpha0;
    out.h = h;
    out.k_range = k_max;

    // Conjugate pairs (upper, lower) with Im(upper) > 0.
    const double lscale = std::max(1.0, max_abs(ed.values));
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i) {
        if (ed.values[i].imag() <= tol.alias_real_tol * lscale) continue;
        int best = -1;
        double dist = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            const double d = std::abs(ed.values[j] - std::conj(ed.values[i]));
            if (j != i && d < dist) {
                dist = d;
                best = j;
            }
        }
        pairs.emplace_back(i, best);
    }
    if (pairs.empty()) {
        out.branches.push_back(alpha0);
        out.shifts.emplace_back();
        return out;
    }

    const CMat& p = ed.vectors;
    const CMat pinv = p.inverse();
    const Mat target = mat_exp(alpha0, h, tol);
    const double target_scale = std::max(1.0, target.cwiseAbs().maxCoeff());

    std::vector<int> shift(pairs.size(), -k_max);
    for (;;) {
        Mat branch;
        if (std::all_of(shift.begin(), shift.end(), [](int s) { return s == 0; })) {
            branch = alpha0;
        } else {
            CVec diag(n);
            for (int i = 0; i < n; ++i) diag(i) = ed.values[i];
            for (std::size_t q = 0; q < pairs.size(); ++q) {
                const Complex delta(0.0, kTwoPi * shift[q] / h);
                diag(pairs[q].first) += delta;
                diag(pairs[q].second) -= delta;
            }
            const CMat reassembled = p * diag.asDiagonal() * pinv;
            const double residue = reassembled.imag().cwiseAbs().maxCoeff();
            if (residue > tol.branch_imag_tol * std::max(1.0, reassembled.cwiseAbs().maxCoeff())) {
                throw ConsistencyError("log_branches: reassembled branch is not real (imaginary residue " +
                                       std::to_string(residue) + ")");
            }
            branch = reassembled.real();
        }
        const double err = (mat_exp(branch, h, tol) - target).cwiseAbs().maxCoeff();
        if (err > tol.branch_check_tol * target_scale) {
            throw ConsistencyError("log_branches: exp(h b) differs from exp(h a0) by " + std::to_string(err));
        }
        out.branches.push_back(std::move(branch));
        out.shifts.push_back(shift);

        std::size_t q = 0;
        while (q < shift.size() && ++shift[q] > k_max) shift[q++] = -k_max;
        if (q == shift.size()) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Determinant identity

ExpDifferenceDeterminant exp_difference_determinant(const std::vector<Complex>& lambda, const Tolerances& tol) {
    const int n = static_cast<int>(lambda.size());
    if (n < 2) throw PreconditionError("exp_difference_determinant: need at least two values");
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(lambda[i].real()) || !std::isfinite(lambda[i].imag())) {
            throw DomainError("exp_difference_determinant: non-finite value");
        }
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(lambda[i] - lambda[j]) <= tol.det_min_gap) {
                throw PreconditionError("exp_difference_determinant: values must be pairwise distinct");
            }
        }
    }

    CMat m(n, n);
    for (int j = 1; j <= n; ++j) {
        const Complex e1 = std::exp(static_cast<double>(j) * lambda[0]);
        m(j - 1, 0) = e1;
        for (int i = 1; i < n; ++i) {
            m(j - 1, i) = (e1 - std::exp(static_cast<double>(j) * lambda[i])) / (lambda[0] - lambda[i]);
        }
    }

    ExpDifferenceDeterminant out;
    out.numeric = m.fullPivLu().determinant();

    Complex sum = 0.0;
    for (const Complex& l : lambda) sum += l;
    Complex vandermonde = 1.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) vandermonde *= std::exp(lambda[j]) - std::exp(lambda[i]);
    }
    Complex denom = 1.0;
    for (int i = 1; i < n; ++i) denom *= lambda[0] - lambda[i];
    const double sign = (n - 1) % 2 == 0 ? 1.0 : -1.0;
    out.closed_form = sign * std::exp(sum) * vandermonde / denom;
    out.printed_sign = ((n * (n - 1) / 2) % 2 == 0) ? 1 : -1;
    return out;
}

// ---------------------------------------------------------------------------
// Exact observation map and rank

Vec phi_exact(const Mat& alpha, const Vec& x0, double h, int m) {
    require_square(alpha, "phi_exact");
    if (x0.size() != alpha.rows()) throw DimensionError("phi_exact: x0 dimension mismatch");
    if (m < 1) throw PreconditionError("phi_exact: m must be >= 1");
    const Eigen::Index k = alpha.rows();
    Vec out(m * k);
    for (int j = 1; j <= m; ++j) out.segment((j - 1) * k, k) = mat_exp(alpha, j * h) * x0;
    return out;
}

Mat phi_exact_jacobian(const Mat& alpha, const Vec& x0, double h, int m) {
    require_square(alpha, "phi_exact_jacobian");
    if (x0.size() != alpha.rows()) throw DimensionError("phi_exact_jacobian: x0 dimension mismatch");
    const Eigen::Index k = alpha.rows();
    Mat jac(m * k, k * k);
    Mat block = Mat::Zero(2 * k, 2 * k);
    block.topLeftCorner(k, k) = alpha;
    block.bottomRightCorner(k, k) = alpha;
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
            block.topRightCorner(k, k).setZero();
            block(r, k + c) = 1.0;
            for (int j = 1; j <= m; ++j) {
                const Mat e = mat_exp(block, j * h);
                jac.block((j - 1) * k, r * k + c, k, 1) = e.topRightCorner(k, k) * x0;
            }
        }
    }
    return jac;
}

FullRankCheck full_rank_check(const Mat& alpha0, const Vec& x0, double h, int m, double integrator_tol,
                              const Tolerances& tol) {
    require_square(alpha0, "full_rank_check");
    const int k = static_cast<int>(alpha0.rows());
    if (m * k < k * k) throw PreconditionError("full_rank_check: need m k >= k^2 observations");
    const ObservationMap map(ParamSystem::matrix_linear(k), x0, h, m, integrator_tol);
    const Mat jac = phi_jacobian(map, flatten(alpha0));
    auto sigma = singular_values(jac);
    FullRankCheck out;
    out.sigma_max = sigma.empty() ? 0.0 : sigma.front();
    out.sigma_min = sigma.size() < static_cast<std::size_t>(k * k) ? 0.0 : sigma.back();
    out.rank = numerical_rank(sigma, static_cast<int>(jac.rows()), k * k, tol.jacobian_rank_tol);
    out.full = out.rank == k * k;
    return out;
}

}  // namespace odeident
