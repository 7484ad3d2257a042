#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "odeident/config.hpp"
#include "odeident/numkernel.hpp"
#include "odeident/ode.hpp"

namespace odeident {

/// Binds (system, x0, h, m) into the observation map
///
///     Phi(a) = (X(h, a), X(2h, a), ..., X(mh, a)) in R^{m k},
///
/// stacked sample-major: all k coordinates of sample 1, then sample 2, ...
class ObservationMap {
public:
    ObservationMap(ParamSystem sys, Vec x0, double h, int m, double tol = 1e-10);

    const ParamSystem& system() const noexcept { return sys_; }
    const Vec& x0() const noexcept { return x0_; }
    double h() const noexcept { return h_; }
    int samples() const noexcept { return m_; }
    double tol() const noexcept { return tol_; }
    int param_dim() const noexcept { return sys_.param_dim(); }
    int output_dim() const noexcept { return m_ * sys_.state_dim(); }

    /// True when m k < n, so DPhi can never have full column rank.
    bool underdetermined() const noexcept { return output_dim() < param_dim(); }

    /// Same system and x0 with a different sampling step / initial condition.
    ObservationMap with_step(double h) const;
    ObservationMap with_initial(Vec x0) const;

private:
    ParamSystem sys_;
    Vec x0_;
    double h_;
    int m_;
    double tol_;
};

struct PhiEval {
    Vec value;     // m k
    Mat jacobian;  // (m k) x n, rows ordered as `value`
    bool exact_derivatives = true;
};

Vec phi(const ObservationMap& map, const Vec& alpha);
Mat phi_jacobian(const ObservationMap& map, const Vec& alpha);
PhiEval phi_with_jacobian(const ObservationMap& map, const Vec& alpha);

/// The quantitative local-injectivity certificate. With
/// J = DPhi(alpha0), beta = sigma_min(J)^2, gamma bounding ||D^2 Phi|| on
/// B(alpha0, r_work), Phi is one-to-one on B(alpha0, r_cert) with
/// r_cert = min(r_work, sqrt(beta) / (6 gamma)) and
/// ||Phi(x) - Phi(y)|| >= (sqrt(beta)/2) ||x - y|| there.
struct InjectivityCertificate {
    Vec alpha0;
    double beta = 0.0;
    double gamma = 0.0;           // safety_factor * gamma_raw
    double r_work = 0.0;
    double r_cert = 0.0;
    double lipschitz_lower = 0.0;  // sqrt(beta) / 2
    int gamma_samples = 0;
    double safety_factor = 1.0;

    double gamma_raw = 0.0;  // largest sampled ||D^2 Phi||
    std::string gamma_norm = "bilinear-operator-sampled";
    double sigma_max = 0.0;
    int jacobian_rank = 0;
    bool exact_derivatives = true;
    std::uint64_t seed = 0;
};

/// Pure assembly of the certificate from beta and an (unscaled) gamma estimate.
InjectivityCertificate make_certificate(const Vec& alpha0, double beta, double gamma_raw, double r_work,
                                        double safety, int gamma_samples);

/// Largest sampled bilinear operator norm of D^2 Phi over `samples` points of
/// B(alpha0, r_work) (alpha0 itself first). At each point the maximizing
/// direction pair is refined by alternating singular-vector iteration on
/// central differences of the Jacobian. Draws are seeded per point by counter.
double estimate_second_derivative_norm(const ObservationMap& map, const Vec& alpha0, double r_work, int samples,
                                       std::uint64_t seed, const Tolerances& cfg = {});

/// Throws NotIdentifiable when beta <= n * eps * sigma_max^2.
InjectivityCertificate certify_radius(const ObservationMap& map, const Vec& alpha0, double r_work,
                                      int gamma_samples = 40, double safety = 1.5, std::uint64_t seed = 0,
                                      const Tolerances& cfg = {});

struct LowerBoundReport {
    long pairs_tested = 0;
    long violations = 0;
    long identical_pairs = 0;  // skipped, x == y
    double worst_ratio = 0.0;  // min ||Phi(x) - Phi(y)|| / ||x - y||
    double required_ratio = 0.0;
};

/// Checks ||Phi(x) - Phi(y)|| >= (sqrt(beta)/2 - margin sqrt(beta)) ||x - y|| on given pairs.
LowerBoundReport verify_pairs(const ObservationMap& map, const InjectivityCertificate& cert,
                              const std::vector<std::pair<Vec, Vec>>& pairs, const Tolerances& cfg = {});

/// Samples `pair_count` independent uniform pairs in B(alpha0, r_cert).
LowerBoundReport verify_lower_bound(const ObservationMap& map, const InjectivityCertificate& cert, long pair_count,
                                    std::uint64_t seed, const Tolerances& cfg = {});

/// Axis-aligned box; `lo(i) == hi(i)` is allowed only for single-point axes.
struct Box {
    Vec lo;
    Vec hi;
};

enum class ZetaFlag { Ok = 0, NearCritical = 1, Failed = 2 };

struct ZetaCell {
    double t = 0.0;
    Vec alpha;
    Vec x;
    double zeta = 0.0;      // det(J^T J)
    double zeta_rel = 0.0;  // det(J^T J) / sigma_max^{2n}
    ZetaFlag flag = ZetaFlag::Ok;
};

struct ZetaScan {
    std::vector<ZetaCell> cells;
    long flagged = 0;
    long failed = 0;
    double flagged_fraction = 0.0;
    double rank_tol = 0.0;
};

/// Evaluates zeta(t, a, x) = det(J^T J) for the map sampled at (t h, 2 t h,
/// ..., m t h) over the lattice t_values x alpha-lattice x x-lattice. `grid`
/// holds one point count per alpha axis followed by one per x axis.
ZetaScan zeta_scan(const ObservationMap& map, const std::vector<double>& t_values, const Box& alpha_box,
                   const Box& x_box, const std::vector<int>& grid, double rank_tol = 1e-10,
                   const Tolerances& cfg = {});

/// Uniform point in the Euclidean ball B(center, radius).
Vec sample_ball(const Vec& center, double radius, std::uint64_t seed, std::uint64_t counter, std::uint64_t stream);

}  // namespace odeident
