#include "odeident/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "odeident/errors.hpp"

namespace odeident {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

bool complex_less(const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

// Coefficients of the diagonal [q/q] Padé approximant of exp.
std::vector<double> pade_coefficients(int q) {
    std::vector<double> c(q + 1);
    c[0] = 1.0;
    for (int j = 1; j <= q; ++j) {
        c[j] = c[j - 1] * static_cast<double>(q - j + 1) / static_cast<double>(j * (2 * q - j + 1));
    }
    return c;
}

template <typename MatT>
MatT expm_impl(const MatT& a, double t, const Tolerances& tol) {
    using Scalar = typename MatT::Scalar;
    if (a.rows() != a.cols()) throw DimensionError("mat_exp: matrix must be square");
    if (!std::isfinite(t)) throw DomainError("mat_exp: t must be finite");
    if (!a.allFinite()) throw DomainError("mat_exp: non-finite matrix entry");

    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    MatT x = a * Scalar(t);
    const double norm = x.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(norm)) throw RangeError("mat_exp: ||tA|| is not representable");

    int squarings = 0;
    if (norm > tol.expm_scaled_norm) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / tol.expm_scaled_norm)));
        x /= std::ldexp(1.0, squarings);
    }

    static const std::vector<double> c = pade_coefficients(6);
    const MatT id = MatT::Identity(n, n);
    MatT power = id;
    MatT num = MatT::Zero(n, n);
    MatT den = MatT::Zero(n, n);
    for (std::size_t j = 0; j < c.size(); ++j) {
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        num += Scalar(c[j]) * power;
        den += Scalar(sign * c[j]) * power;
        power = power * x;
    }
    MatT r = den.partialPivLu().solve(num);
    for (int s = 0; s < squarings; ++s) {
        r = r * r;
    }
    if (!r.allFinite()) throw RangeError("mat_exp: result overflows double precision");
    return r;
}

// Groups indices of `values` whose members lie within `radius` of each other
// (single linkage).
std::vector<std::vector<int>> cluster(const std::vector<Complex>& values, double radius) {
    const int n = static_cast<int>(values.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(values[i] - values[j]) <= radius) parent[find(i)] = find(j);
        }
    }
    std::vector<std::vector<int>> groups;
    std::vector<int> slot(n, -1);
    for (int i = 0; i < n; ++i) {
        const int root = find(i);
        if (slot[root] < 0) {
            slot[root] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[slot[root]].push_back(i);
    }
    return groups;
}

CVec null_vector_2x2(const Mat& a, Complex lambda) {
    const Complex m00 = a(0, 0) - lambda, m01 = a(0, 1);
    const Complex m10 = a(1, 0), m11 = a(1, 1) - lambda;
    CVec v(2);
    const double row0 = std::abs(m00) + std::abs(m01);
    const double row1 = std::abs(m10) + std::abs(m11);
    if (row0 >= row1) {
        v << -m01, m00;
    } else {
        v << -m11, m10;
    }
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Poly

Poly::Poly(std::vector<double> ascending) : coeffs_(std::move(ascending)) {
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
    if (coeffs_.empty()) coeffs_.push_back(0.0);
    for (double c : coeffs_) {
        if (!std::isfinite(c)) throw DomainError("Poly: non-finite coefficient");
    }
}

Poly Poly::from_roots(const std::vector<Complex>& roots) {
    std::vector<Complex> c{Complex(1.0)};
    for (const Complex& r : roots) {
        std::vector<Complex> next(c.size() + 1, Complex(0.0));
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= r * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> re(c.size());
    std::transform(c.begin(), c.end(), re.begin(), [](Complex z) { return z.real(); });
    return Poly(std::move(re));
}

Poly Poly::derivative() const {
    if (coeffs_.size() == 1) return Poly();
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t i = 1; i < coeffs_.size(); ++i) d[i - 1] = static_cast<double>(i) * coeffs_[i];
    return Poly(std::move(d));
}

double Poly::operator()(double x) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
}

Complex Poly::operator()(Complex x) const {
    Complex acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
}

// ---------------------------------------------------------------------------
// Validation helpers

void require_square(const Mat& a, const char* what) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(what) + ": matrix must be square, got " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

void require_finite(const Mat& a, const char* what) {
    if (!a.allFinite()) throw DomainError(std::string(what) + ": non-finite matrix entry");
}

void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite vector entry");
}

// ---------------------------------------------------------------------------
// Matrix exponential

Mat mat_exp(const Mat& a, double t, const Tolerances& tol) { return expm_impl(a, t, tol); }

CMat mat_exp(const CMat& a, double t, const Tolerances& tol) { return expm_impl(a, t, tol); }

// ---------------------------------------------------------------------------
// Eigenvalues

EigenDecomposition eigenvalues(const Mat& a, const Tolerances& tol) {
    require_square(a, "eigenvalues");
    require_finite(a, "eigenvalues");
    const int n = static_cast<int>(a.rows());
    if (n > tol.eig_max_dim) {
        throw PreconditionError("eigenvalues: dimension " + std::to_string(n) + " exceeds configured maximum " +
                                std::to_string(tol.eig_max_dim));
    }

    EigenDecomposition out;
    if (n == 0) return out;

    std::vector<Complex> values;
    CMat vectors(n, n);
    if (n == 1) {
        values = {Complex(a(0, 0))};
        vectors(0, 0) = 1.0;
    } else if (n == 2) {
        const double tr = a(0, 0) + a(1, 1);
        const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
        const double diff = a(0, 0) - a(1, 1);
        const double disc = diff * diff + 4.0 * a(0, 1) * a(1, 0);
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            const double l1 = 0.5 * (tr + std::copysign(s, tr));
            const double l2 = (l1 != 0.0) ? det / l1 : 0.5 * (tr - std::copysign(s, tr));
            values = {Complex(l1), Complex(l2)};
        } else {
            const double im = 0.5 * std::sqrt(-disc);
            values = {Complex(0.5 * tr, im), Complex(0.5 * tr, -im)};
        }
        for (int j = 0; j < 2; ++j) {
            CVec v = null_vector_2x2(a, values[j]);
            if (v.norm() == 0.0) {
                v = CVec::Unit(2, j);
            }
            vectors.col(j) = v.normalized();
        }
    } else {
        Eigen::EigenSolver<Mat> solver(a, true);
        if (solver.info() != Eigen::Success) {
            throw ConvergenceError("eigenvalues: Hessenberg QR iteration did not converge");
        }
        const CVec ev = solver.eigenvalues();
        values.assign(ev.data(), ev.data() + n);
        vectors = solver.eigenvectors();
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return complex_less(values[i], values[j]); });
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        out.values[i] = values[order[i]];
        out.vectors.col(i) = vectors.col(order[i]);
    }

    // Geometric multiplicity of each eigenvalue cluster, via the numerical
    // rank of A - lambda I at tolerance n * eps * ||A||.
    const double anorm = a.norm();
    const double radius = tol.eig_cluster_rel * std::max(1.0, anorm);
    const double rank_cut = n * kEps * anorm;
    for (const auto& group : cluster(out.values, radius)) {
        if (group.size() < 2) continue;
        Complex mean = 0.0;
        for (int i : group) mean += out.values[i];
        mean /= static_cast<double>(group.size());
        const CMat shifted = a.cast<Complex>() - mean * CMat::Identity(n, n);
        const auto sigma = singular_values(shifted);
        const auto rank = std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > rank_cut; });
        const auto geometric = n - rank;
        if (geometric < static_cast<long>(group.size())) {
            out.defective = true;
            break;
        }
    }
    // A split Jordan block of size s separates its eigenvalues by ~eps^(1/s),
    // beyond any fixed cluster radius, but leaves the eigenvectors nearly parallel.
    if (!out.defective && n >= 2) {
        const auto sv = singular_values(out.vectors);
        out.defective = !(sv.back() > tol.eig_vector_rcond * sv.front());
    }
    if (out.defective) out.vectors.resize(0, 0);
    return out;
}

std::vector<Complex> monic_cubic_roots(double c0, double c1, double c2) {
    const double shift = c2 / 3.0;
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    const double disc = 0.25 * q * q + p * p * p / 27.0;

    std::vector<Complex> roots;
    if (p == 0.0 && q == 0.0) {
        roots.assign(3, Complex(-shift));
    } else if (disc > 0.0) {
        const double sq = std::sqrt(disc);
        const double u = std::cbrt(-0.5 * q + sq);
        const double v = std::cbrt(-0.5 * q - sq);
        const double re = -0.5 * (u + v) - shift;
        const double im = 0.5 * std::sqrt(3.0) * (u - v);
        roots = {Complex(u + v - shift), Complex(re, im), Complex(re, -im)};
    } else {
        const double r = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) {
            roots.emplace_back(r * std::cos(phi - 2.0 * M_PI * k / 3.0) - shift);
        }
    }
    std::sort(roots.begin(), roots.end(), complex_less);
    return roots;
}

// ---------------------------------------------------------------------------
// Least squares and singular values

LeastSquaresResult least_squares(const Mat& a, const Vec& b) {
    if (a.rows() < 1 || a.cols() < 1) throw DimensionError("least_squares: empty system");
    if (a.rows() != b.size()) {
        throw DimensionError("least_squares: A has " + std::to_string(a.rows()) + " rows but b has " +
                             std::to_string(b.size()) + " entries");
    }
    require_finite(a, "least_squares");
    require_finite(b, "least_squares");

    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sigma = svd.singularValues();
    const double smax = sigma.size() > 0 ? sigma(0) : 0.0;
    const double cut = static_cast<double>(std::max(a.rows(), a.cols())) * kEps * smax;

    LeastSquaresResult out;
    Vec ub = svd.matrixU().adjoint() * b;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) > cut) {
            ub(i) /= sigma(i);
            ++out.rank;
        } else {
            ub(i) = 0.0;
        }
    }
    out.x = svd.matrixV() * ub;
    out.residual = (a * out.x - b).norm();
    out.rank_deficient = out.rank < a.cols();
    out.condition = out.rank_deficient ? std::numeric_limits<double>::infinity()
                                       : smax / sigma(sigma.size() - 1);
    return out;
}

std::vector<double> singular_values(const Mat& a) {
    if (a.size() == 0) return {};
    Eigen::JacobiSVD<Mat> svd(a);
    const Vec& s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

std::vector<double> singular_values(const CMat& a) {
    if (a.size() == 0) return {};
    Eigen::JacobiSVD<CMat> svd(a);
    const Vec& s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

int numerical_rank(const std::vector<double>& sigma, int rows, int cols, double rel_tol) {
    if (sigma.empty() || sigma.front() <= 0.0) return 0;
    const double rel = rel_tol < 0.0 ? std::max(rows, cols) * kEps : rel_tol;
    const double cut = rel * sigma.front();
    return static_cast<int>(std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cut; }));
}

// ---------------------------------------------------------------------------
// Resultants

Mat sylvester_matrix(const Poly& p, const Poly& q) {
    const int dp = p.degree();
    const int dq = q.degree();
    if (dp < 1 || dq < 1) throw DomainError("sylvester_resultant: both polynomials must have degree >= 1");
    const int size = dp + dq;
    Mat s = Mat::Zero(size, size);
    const auto& pc = p.coefficients();
    const auto& qc = q.coefficients();
    for (int r = 0; r < dq; ++r) {
        for (int j = 0; j <= dp; ++j) s(r, r + j) = pc[dp - j];
    }
    for (int r = 0; r < dp; ++r) {
        for (int j = 0; j <= dq; ++j) s(dq + r, r + j) = qc[dq - j];
    }
    return s;
}

double sylvester_resultant(const Poly& p, const Poly& q) {
    return sylvester_matrix(p, q).fullPivLu().determinant();
}

Poly characteristic_polynomial(const Mat& a) {
    require_square(a, "characteristic_polynomial");
    require_finite(a, "characteristic_polynomial");
    // Faddeev-LeVerrier recursion.
    const Eigen::Index n = a.rows();
    std::vector<double> c(n + 1, 0.0);
    c[n] = 1.0;
    Mat m = Mat::Zero(n, n);
    const Mat id = Mat::Identity(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        m = a * m + c[n - k + 1] * id;
        c[n - k] = -(a * m).trace() / static_cast<double>(k);
    }
    return Poly(std::move(c));
}

}  // namespace odeident
