#include "odeident/obsmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "odeident/errors.hpp"
#include "odeident/rng.hpp"

namespace odeident {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Stream tags keep the certificate's independent random draws apart.
constexpr std::uint64_t kGammaPointStream = 1;
constexpr std::uint64_t kGammaDirectionStream = 2;
constexpr std::uint64_t kPairFirstStream = 3;
constexpr std::uint64_t kPairSecondStream = 4;

Vec random_unit(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(n);
    do {
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    } while (v.norm() == 0.0);
    return v.normalized();
}

// Top singular value and right singular vector.
std::pair<double, Vec> top_singular(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinV);
    return {svd.singularValues()(0), svd.matrixV().col(0)};
}

}  // namespace

// ---------------------------------------------------------------------------
// ObservationMap

ObservationMap::ObservationMap(ParamSystem sys, Vec x0, double h, int m, double tol)
    : sys_(std::move(sys)), x0_(std::move(x0)), h_(h), m_(m), tol_(tol) {
    if (x0_.size() != sys_.state_dim()) {
        throw DimensionError("ObservationMap: x0 has size " + std::to_string(x0_.size()) + ", system state_dim is " +
                             std::to_string(sys_.state_dim()));
    }
    if (!(h_ > 0.0) || !std::isfinite(h_)) throw PreconditionError("ObservationMap: h must be positive");
    if (m_ < 1) throw PreconditionError("ObservationMap: m must be >= 1");
    require_finite(x0_, "ObservationMap");
}

ObservationMap ObservationMap::with_step(double h) const { return ObservationMap(sys_, x0_, h, m_, tol_); }

ObservationMap ObservationMap::with_initial(Vec x0) const { return ObservationMap(sys_, std::move(x0), h_, m_, tol_); }

// ---------------------------------------------------------------------------
// Phi and DPhi

Vec phi(const ObservationMap& map, const Vec& alpha) {
    const auto traj = integrate(map.system(), alpha, map.x0(), map.h() * map.samples(), map.samples(), map.tol());
    const Eigen::Index k = map.system().state_dim();
    Vec out(map.output_dim());
    for (int j = 1; j <= map.samples(); ++j) out.segment((j - 1) * k, k) = traj.states[j];
    return out;
}

PhiEval phi_with_jacobian(const ObservationMap& map, const Vec& alpha) {
    const auto bundle =
        integrate_with_sensitivity(map.system(), alpha, map.x0(), map.h() * map.samples(), map.samples(), map.tol());
    const Eigen::Index k = map.system().state_dim();
    PhiEval out;
    out.value.resize(map.output_dim());
    out.jacobian.resize(map.output_dim(), map.param_dim());
    out.exact_derivatives = bundle.exact_derivatives;
    for (int j = 1; j <= map.samples(); ++j) {
        out.value.segment((j - 1) * k, k) = bundle.states[j];
        out.jacobian.middleRows((j - 1) * k, k) = bundle.sensitivities[j];
    }
    return out;
}

Mat phi_jacobian(const ObservationMap& map, const Vec& alpha) { return phi_with_jacobian(map, alpha).jacobian; }

// ---------------------------------------------------------------------------
// Certificate

InjectivityCertificate make_certificate(const Vec& alpha0, double beta, double gamma_raw, double r_work,
                                        double safety, int gamma_samples) {
    if (!(r_work > 0.0)) throw PreconditionError("certificate: r_work must be positive");
    if (!(safety >= 1.0)) throw PreconditionError("certificate: safety factor must be >= 1");
    if (!(beta >= 0.0)) throw PreconditionError("certificate: beta must be non-negative");
    InjectivityCertificate c;
    c.alpha0 = alpha0;
    c.beta = beta;
    c.gamma_raw = gamma_raw;
    c.gamma = safety * gamma_raw;
    c.r_work = r_work;
    c.safety_factor = safety;
    c.gamma_samples = gamma_samples;
    c.lipschitz_lower = 0.5 * std::sqrt(beta);
    // gamma == 0 means Phi is affine on the ball: injective on all of it.
    c.r_cert = c.gamma > 0.0 ? std::min(r_work, std::sqrt(beta) / (6.0 * c.gamma)) : r_work;
    return c;
}

double estimate_second_derivative_norm(const ObservationMap& map, const Vec& alpha0, double r_work, int samples,
                                       std::uint64_t seed, const Tolerances& cfg) {
    const Eigen::Index n = map.param_dim();
    double best = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Vec point = s == 0 ? alpha0 : sample_ball(alpha0, r_work, seed, s, kGammaPointStream);
        const double step = cfg.second_diff_step * std::max(1.0, point.norm());
        auto rng = counter_rng(seed, s, kGammaDirectionStream);
        Vec u = random_unit(rng, n);
        // M_u v = D^2 Phi(point)(u, v); alternating u <- argmax_v ||M_u v||
        // increases ||D^2 Phi(u, v)|| monotonically.
        for (int it = 0; it < cfg.gamma_power_iterations; ++it) {
            const Mat jp = phi_jacobian(map, point + step * u);
            const Mat jm = phi_jacobian(map, point - step * u);
            const Mat mu = (jp - jm) / (2.0 * step);
            auto [sigma, v] = top_singular(mu);
            best = std::max(best, sigma);
            if (sigma == 0.0) break;
            u = v;
        }
    }
    return best;
}

InjectivityCertificate certify_radius(const ObservationMap& map, const Vec& alpha0, double r_work, int gamma_samples,
                                      double safety, std::uint64_t seed, const Tolerances& cfg) {
    if (!(r_work > 0.0)) throw PreconditionError("certify_radius: r_work must be positive");
    if (gamma_samples < 10) throw PreconditionError("certify_radius: gamma_samples must be >= 10");
    if (!(safety >= 1.0)) throw PreconditionError("certify_radius: safety must be >= 1");
    if (alpha0.size() != map.param_dim()) throw DimensionError("certify_radius: alpha0 dimension mismatch");

    const PhiEval at0 = phi_with_jacobian(map, alpha0);
    const auto sigma = singular_values(at0.jacobian);
    const Eigen::Index n = map.param_dim();
    const double smax = sigma.empty() ? 0.0 : sigma.front();
    // Fewer rows than parameters: the missing singular values are zero.
    const double smin = static_cast<Eigen::Index>(sigma.size()) < n ? 0.0 : sigma.back();
    const double beta = smin * smin;
    const int rank = numerical_rank(sigma, static_cast<int>(at0.jacobian.rows()), static_cast<int>(n));

    if (smax == 0.0 || beta <= static_cast<double>(n) * kEps * smax * smax) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "certify_radius: DPhi(alpha0) is rank deficient (beta = %.3g, sigma_max = %.3g)",
                      beta, smax);
        throw NotIdentifiable(msg, beta, smax, rank);
    }

    const double gamma_raw = estimate_second_derivative_norm(map, alpha0, r_work, gamma_samples, seed, cfg);
    InjectivityCertificate cert = make_certificate(alpha0, beta, gamma_raw, r_work, safety, gamma_samples);
    cert.sigma_max = smax;
    cert.jacobian_rank = rank;
    cert.exact_derivatives = at0.exact_derivatives;
    cert.seed = seed;
    return cert;
}

LowerBoundReport verify_pairs(const ObservationMap& map, const InjectivityCertificate& cert,
                              const std::vector<std::pair<Vec, Vec>>& pairs, const Tolerances& cfg) {
    LowerBoundReport rep;
    const double root_beta = std::sqrt(cert.beta);
    rep.required_ratio = 0.5 * root_beta - cfg.lower_bound_margin * root_beta;
    rep.worst_ratio = std::numeric_limits<double>::infinity();
    for (const auto& [x, y] : pairs) {
        const double dist = (x - y).norm();
        if (dist == 0.0) {
            ++rep.identical_pairs;
            continue;
        }
        const double image = (phi(map, x) - phi(map, y)).norm();
        const double ratio = image / dist;
        ++rep.pairs_tested;
        rep.worst_ratio = std::min(rep.worst_ratio, ratio);
        if (image < rep.required_ratio * dist) ++rep.violations;
    }
    return rep;
}

LowerBoundReport verify_lower_bound(const ObservationMap& map, const InjectivityCertificate& cert, long pair_count,
                                    std::uint64_t seed, const Tolerances& cfg) {
    std::vector<std::pair<Vec, Vec>> pairs;
    pairs.reserve(pair_count);
    for (long i = 0; i < pair_count; ++i) {
        const auto c = static_cast<std::uint64_t>(i);
        pairs.emplace_back(sample_ball(cert.alpha0, cert.r_cert, seed, c, kPairFirstStream),
                           sample_ball(cert.alpha0, cert.r_cert, seed, c, kPairSecondStream));
    }
    return verify_pairs(map, cert, pairs, cfg);
}

Vec sample_ball(const Vec& center, double radius, std::uint64_t seed, std::uint64_t counter, std::uint64_t stream) {
    auto rng = counter_rng(seed, counter, stream);
    const Eigen::Index n = center.size();
    const Vec dir = random_unit(rng, n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
    return center + r * dir;
}

// ---------------------------------------------------------------------------
// zeta scan

ZetaScan zeta_scan(const ObservationMap& map, const std::vector<double>& t_values, const Box& alpha_box,
                   const Box& x_box, const std::vector<int>& grid, double rank_tol, const Tolerances& cfg) {
    const Eigen::Index n = map.param_dim();
    const Eigen::Index k = map.system().state_dim();
    if (alpha_box.lo.size() != n || alpha_box.hi.size() != n || x_box.lo.size() != k || x_box.hi.size() != k) {
        throw DimensionError("zeta_scan: box dimensions do not match the system");
    }
    if (static_cast<Eigen::Index>(grid.size()) != n + k) {
        throw DimensionError("zeta_scan: grid needs one count per alpha axis and per x axis");
    }
    if (t_values.empty()) throw PreconditionError("zeta_scan: t_values is empty");
    for (double t : t_values) {
        if (!(t > 0.0)) throw PreconditionError("zeta_scan: t values must be positive");
    }

    std::vector<double> lo(n + k), hi(n + k);
    for (Eigen::Index i = 0; i < n; ++i) {
        lo[i] = alpha_box.lo(i);
        hi[i] = alpha_box.hi(i);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        lo[n + i] = x_box.lo(i);
        hi[n + i] = x_box.hi(i);
    }
    long total = static_cast<long>(t_values.size());
    for (std::size_t a = 0; a < grid.size(); ++a) {
        if (grid[a] < 1) throw PreconditionError("zeta_scan: grid counts must be >= 1");
        if (!(lo[a] <= hi[a]) || (grid[a] > 1 && lo[a] == hi[a])) {
            throw PreconditionError("zeta_scan: degenerate box along axis " + std::to_string(a));
        }
        total *= grid[a];
        if (total > cfg.zeta_budget) throw PreconditionError("zeta_scan: lattice exceeds the configured budget");
    }

    auto coord = [&](std::size_t axis, int i) {
        return grid[axis] == 1 ? lo[axis] : lo[axis] + (hi[axis] - lo[axis]) * i / (grid[axis] - 1);
    };

    ZetaScan out;
    out.rank_tol = rank_tol;
    out.cells.reserve(total);
    std::vector<int> idx(grid.size(), 0);
    for (double t : t_values) {
        const ObservationMap scaled = map.with_step(t * map.h());
        std::fill(idx.begin(), idx.end(), 0);
        for (;;) {
            ZetaCell cell;
            cell.t = t;
            cell.alpha.resize(n);
            cell.x.resize(k);
            for (Eigen::Index i = 0; i < n; ++i) cell.alpha(i) = coord(i, idx[i]);
            for (Eigen::Index i = 0; i < k; ++i) cell.x(i) = coord(n + i, idx[n + i]);
            try {
                const Mat j = phi_jacobian(scaled.with_initial(cell.x), cell.alpha);
                auto sigma = singular_values(j);
                sigma.resize(n, 0.0);
                const double smax = sigma.front();
                double zeta = 1.0, rel = 1.0;
                for (double s : sigma) {
                    zeta *= s * s;
                    rel *= smax > 0.0 ? (s / smax) * (s / smax) : 0.0;
                }
                cell.zeta = zeta;
                cell.zeta_rel = smax > 0.0 ? rel : 0.0;
                cell.flag = (smax == 0.0 || cell.zeta_rel < rank_tol) ? ZetaFlag::NearCritical : ZetaFlag::Ok;
            } catch (const IntegrationError&) {
                cell.zeta = std::numeric_limits<double>::quiet_NaN();
                cell.zeta_rel = cell.zeta;
                cell.flag = ZetaFlag::Failed;
            }
            if (cell.flag == ZetaFlag::NearCritical) ++out.flagged;
            if (cell.flag == ZetaFlag::Failed) ++out.failed;
            out.cells.push_back(std::move(cell));

            std::size_t axis = 0;
            while (axis < idx.size() && ++idx[axis] == grid[axis]) idx[axis++] = 0;
            if (axis == idx.size()) break;
        }
    }
    out.flagged_fraction = out.cells.empty() ? 0.0 : static_cast<double>(out.flagged) / out.cells.size();
    return out;
}

}  // namespace odeident
