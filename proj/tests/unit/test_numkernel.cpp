#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "odeident/errors.hpp"
#include "odeident/numkernel.hpp"

using namespace odeident;
using testing::max_abs;
using testing::random_matrix;
using testing::rel_err;

namespace {

// Truncated Taylor series in long double; accurate for ||A|| up to a few units.
Mat taylor_exp(const Mat& a) {
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const LMat al = a.cast<long double>();
    LMat term = LMat::Identity(a.rows(), a.cols());
    LMat sum = term;
    for (int j = 1; j < 80; ++j) {
        term = term * al / static_cast<long double>(j);
        sum += term;
    }
    return sum.cast<double>();
}

}  // namespace

TEST_CASE("mat_exp matches closed forms") {
    Mat d = Mat::Zero(3, 3);
    d.diagonal() << -2.0, 0.5, 3.0;
    const Mat ed = mat_exp(d, 1.5);
    for (int i = 0; i < 3; ++i) CHECK(rel_err(ed(i, i), std::exp(1.5 * d(i, i))) < 1e-14);
    CHECK(std::abs(ed(0, 1)) < 1e-300);

    const double theta = 2.7;
    Mat rot(2, 2);
    rot << 0.0, theta, -theta, 0.0;
    const Mat er = mat_exp(rot);
    CHECK(std::abs(er(0, 0) - std::cos(theta)) < 1e-14);
    CHECK(std::abs(er(0, 1) - std::sin(theta)) < 1e-14);
    CHECK(std::abs(er(1, 0) + std::sin(theta)) < 1e-14);

    Mat nil(2, 2);
    nil << 0.0, 1.0, 0.0, 0.0;
    const Mat en = mat_exp(nil, 4.0);
    CHECK(en(0, 0) == doctest::Approx(1.0));
    CHECK(en(0, 1) == doctest::Approx(4.0));
    CHECK(en(1, 0) == 0.0);
}

TEST_CASE("mat_exp agrees with an extended-precision Taylor series") {
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 6;
        const Mat a = random_matrix(gen, n, n, -1.5, 1.5);
        const Mat e = mat_exp(a);
        const Mat ref = taylor_exp(a);
        CHECK(max_abs(e - ref) <= 1e-12 * std::max(1.0, max_abs(ref)));
    }
}

TEST_CASE("mat_exp algebraic properties") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 4;
        const Mat a = random_matrix(gen, n, n, -3.0, 3.0);
        const Mat e1 = mat_exp(a);
        const Mat e2 = mat_exp(a, 2.0);
        CHECK(max_abs(mat_exp(a) * mat_exp(a, -1.0) - Mat::Identity(n, n)) < 1e-10);
        CHECK(max_abs(e1 * e1 - e2) <= 1e-11 * std::max(1.0, max_abs(e2)));
        CHECK(rel_err(e1.determinant(), std::exp(a.trace())) < 1e-10);
    }
}

TEST_CASE("mat_exp on complex matrices") {
    const double theta = 0.9;
    CMat a = CMat::Identity(2, 2) * Complex(0.0, theta);
    const CMat e = mat_exp(a);
    CHECK(std::abs(e(0, 0) - std::exp(Complex(0.0, theta))) < 1e-14);
    CHECK(std::abs(e(0, 1)) < 1e-15);
}

TEST_CASE("mat_exp error handling") {
    Mat big = Mat::Identity(2, 2) * 1000.0;
    CHECK_THROWS_AS(mat_exp(big), RangeError);
    Mat bad = Mat::Identity(2, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(mat_exp(bad), DomainError);
    CHECK_THROWS_AS(mat_exp(Mat(Mat::Zero(2, 3))), DimensionError);
    CHECK(mat_exp(Mat(0, 0)).size() == 0);
}

TEST_CASE("eigenvalues of constructed matrices") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 5;
        Mat p = random_matrix(gen, n, n) + 2.0 * Mat::Identity(n, n);
        Vec lam(n);
        for (int i = 0; i < n; ++i) lam(i) = -2.0 + 1.1 * i;
        const Mat a = p * lam.asDiagonal() * p.inverse();
        const auto ed = eigenvalues(a);
        REQUIRE(ed.values.size() == static_cast<std::size_t>(n));
        CHECK_FALSE(ed.defective);
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(ed.values[i] - Complex(lam(i), 0.0)) < 1e-9);
        }
    }
}

TEST_CASE("eigenvalues of a rotation are +-i, sorted by imaginary part") {
    Mat rot(2, 2);
    rot << 0.0, 1.0, -1.0, 0.0;
    const auto ed = eigenvalues(rot);
    REQUIRE(ed.values.size() == 2);
    CHECK(std::abs(ed.values[0] - Complex(0.0, -1.0)) < 1e-15);
    CHECK(std::abs(ed.values[1] - Complex(0.0, 1.0)) < 1e-15);
    const CMat ac = rot.cast<Complex>();
    for (int i = 0; i < 2; ++i) {
        CHECK((ac * ed.vectors.col(i) - ed.values[i] * ed.vectors.col(i)).norm() < 1e-14);
    }
}

TEST_CASE("eigenvectors satisfy A v = l v") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + trial % 5;
        const Mat a = random_matrix(gen, n, n);
        const auto ed = eigenvalues(a);
        if (ed.defective) continue;
        const CMat ac = a.cast<Complex>();
        for (int i = 0; i < n; ++i) {
            CHECK((ac * ed.vectors.col(i) - ed.values[i] * ed.vectors.col(i)).norm() < 1e-10);
        }
        for (int i = 1; i < n; ++i) {
            const bool ordered = ed.values[i - 1].real() < ed.values[i].real() ||
                                 (ed.values[i - 1].real() == ed.values[i].real() &&
                                  ed.values[i - 1].imag() <= ed.values[i].imag());
            CHECK(ordered);
        }
    }
}

TEST_CASE("defective matrices are detected") {
    Mat j2(2, 2);
    j2 << 3.0, 1.0, 0.0, 3.0;
    CHECK(eigenvalues(j2).defective);

    Mat j3 = Mat::Zero(3, 3);
    j3 << 2.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 2.0;
    std::mt19937_64 gen(5);
    const Mat p = random_matrix(gen, 3, 3) + 3.0 * Mat::Identity(3, 3);
    CHECK(eigenvalues(Mat(p * j3 * p.inverse())).defective);

    CHECK_FALSE(eigenvalues(Mat::Identity(3, 3)).defective);
    CHECK_FALSE(eigenvalues(Mat(2.0 * Mat::Identity(2, 2))).defective);
}

TEST_CASE("monic cubic roots") {
    // (x - 1)(x - 2)(x - 3) = x^3 - 6x^2 + 11x - 6
    auto r = monic_cubic_roots(-6.0, 11.0, -6.0);
    REQUIRE(r.size() == 3);
    std::sort(r.begin(), r.end(), [](Complex a, Complex b) { return a.real() < b.real(); });
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r[i] - Complex(i + 1.0, 0.0)) < 1e-12);

    // (x - 2)(x^2 + 1) = x^3 - 2x^2 + x - 2
    const auto c = monic_cubic_roots(-2.0, 1.0, -2.0);
    int complex_roots = 0;
    for (const Complex& z : c) {
        const Complex val = z * z * z - 2.0 * z * z + z - 2.0;
        CHECK(std::abs(val) < 1e-12);
        if (std::abs(z.imag()) > 0.5) ++complex_roots;
    }
    CHECK(complex_roots == 2);

    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double c0 = u(gen), c1 = u(gen), c2 = u(gen);
        for (const Complex& z : monic_cubic_roots(c0, c1, c2)) {
            const Complex val = c0 + z * (c1 + z * (c2 + z));
            CHECK(std::abs(val) < 1e-9 * (1.0 + std::pow(std::abs(z), 3)));
        }
    }
}

TEST_CASE("least squares") {
    std::mt19937_64 gen(13);
    const Mat a = random_matrix(gen, 12, 4);
    const Vec b = testing::random_vector(gen, 12);
    const auto ls = least_squares(a, b);
    const Vec normal = (a.transpose() * a).ldlt().solve(a.transpose() * b);
    CHECK((ls.x - normal).norm() < 1e-12);
    CHECK(ls.rank == 4);
    CHECK_FALSE(ls.rank_deficient);
    CHECK(std::isfinite(ls.condition));
    CHECK(ls.residual == doctest::Approx((a * ls.x - b).norm()));

    Mat r(2, 2);
    r << 1.0, 1.0, 1.0, 1.0;
    Vec rb(2);
    rb << 2.0, 2.0;
    const auto md = least_squares(r, rb);
    CHECK(md.rank_deficient);
    CHECK(md.rank == 1);
    CHECK(std::isinf(md.condition));
    CHECK(md.x(0) == doctest::Approx(1.0));
    CHECK(md.x(1) == doctest::Approx(1.0));
}

TEST_CASE("singular values and numerical rank") {
    Mat a = Mat::Zero(3, 2);
    a(0, 0) = 3.0;
    a(1, 1) = 1e-20;
    const auto s = singular_values(a);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(3.0));
    CHECK(numerical_rank(s, 3, 2) == 1);
    CHECK(numerical_rank({2.0, 1e-3}, 2, 2, 1e-2) == 1);
    CHECK(numerical_rank({2.0, 1e-3}, 2, 2, 1e-4) == 2);
}

TEST_CASE("Poly basics") {
    const Poly p({1.0, 2.0, 0.0, 0.0});
    CHECK(p.degree() == 1);
    CHECK(p(3.0) == 7.0);
    CHECK(Poly({0.0, 0.0}).is_zero());
    const Poly q = Poly::from_roots({Complex(1.0, 0.0), Complex(0.0, 2.0), Complex(0.0, -2.0)});
    // (x - 1)(x^2 + 4) = x^3 - x^2 + 4x - 4
    REQUIRE(q.degree() == 3);
    CHECK(q.coefficients()[0] == doctest::Approx(-4.0));
    CHECK(q.coefficients()[1] == doctest::Approx(4.0));
    CHECK(q.coefficients()[2] == doctest::Approx(-1.0));
    CHECK(std::abs(q(Complex(0.0, 2.0))) < 1e-14);
    const Poly dq = q.derivative();
    CHECK(dq.degree() == 2);
    CHECK(dq(2.0) == doctest::Approx(3.0 * 4.0 - 2.0 * 2.0 + 4.0));
}

TEST_CASE("Sylvester resultant equals lc(p)^deg q times the product of q over the roots of p") {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int dp = 1 + trial % 4;
        const int dq = 1 + (trial / 4) % 4;
        std::vector<Complex> roots;
        for (int i = 0; i < dp; ++i) roots.emplace_back(u(gen), 0.0);
        const double lead = 0.5 + std::abs(u(gen));
        Poly mp = Poly::from_roots(roots);
        std::vector<double> pc = mp.coefficients();
        for (double& c : pc) c *= lead;
        const Poly p(pc);
        std::vector<double> qc(dq + 1);
        for (double& c : qc) c = u(gen);
        qc.back() = 1.0 + std::abs(qc.back());
        const Poly q(qc);

        double ref = std::pow(lead, dq);
        for (const Complex& r : roots) ref *= q(r.real());
        const Mat s = sylvester_matrix(p, q);
        CHECK(s.rows() == dp + dq);
        CHECK(std::abs(sylvester_resultant(p, q) - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    }
    // (x - 1)(x - 2) against its derivative: p'(1) p'(2) = -1.
    const Poly p({2.0, -3.0, 1.0});
    CHECK(sylvester_resultant(p, p.derivative()) == doctest::Approx(-1.0));
}

TEST_CASE("characteristic polynomial") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 6;
        const Mat a = random_matrix(gen, n, n);
        const Poly p = characteristic_polynomial(a);
        REQUIRE(p.degree() == n);
        CHECK(p.leading() == 1.0);
        CHECK(p.coefficients()[n - 1] == doctest::Approx(-a.trace()));
        CHECK(p.coefficients()[0] == doctest::Approx((n % 2 == 0 ? 1.0 : -1.0) * a.determinant()));
        for (const Complex& l : eigenvalues(a).values) CHECK(std::abs(p(l)) < 1e-10);
    }
}
