#include "odeident/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "odeident/errors.hpp"

namespace odeident {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

double parse_double(const std::string& s, int line) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc() || ptr != last) throw ParseError("not a number: '" + s + "'", line);
    return v;
}

// JSON has no inf/nan; they are written as null and read back as nan.
double num_or_nan(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(); }

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& os, const std::vector<double>& times, const std::vector<Vec>& states) {
    if (times.size() != states.size()) throw DimensionError("write_trajectory_csv: times and states differ in length");
    const Eigen::Index k = states.empty() ? 0 : states.front().size();
    os << 't';
    for (Eigen::Index i = 0; i < k; ++i) os << ",x" << (i + 1);
    os << '\n';
    for (std::size_t r = 0; r < times.size(); ++r) {
        os << format_double(times[r]);
        for (Eigen::Index i = 0; i < k; ++i) os << ',' << format_double(states[r](i));
        os << '\n';
    }
}

ObservationGrid read_trajectory_csv(std::istream& is) {
    std::string line;
    int lineno = 0;
    std::size_t cols = 0;
    ObservationGrid grid;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_csv(line);
        if (cols == 0) {
            if (fields.size() < 2 || fields[0] != "t") throw ParseError("expected header 't,x1,...,xk'", lineno);
            for (std::size_t i = 1; i < fields.size(); ++i) {
                if (fields[i] != "x" + std::to_string(i)) {
                    throw ParseError("unexpected column name '" + fields[i] + "'", lineno);
                }
            }
            cols = fields.size();
            continue;
        }
        if (fields.size() != cols) {
            throw ParseError("expected " + std::to_string(cols) + " fields, found " + std::to_string(fields.size()),
                             lineno);
        }
        grid.times.push_back(parse_double(fields[0], lineno));
        Vec v(static_cast<Eigen::Index>(cols - 1));
        for (std::size_t i = 1; i < cols; ++i) v(static_cast<Eigen::Index>(i - 1)) = parse_double(fields[i], lineno);
        grid.values.push_back(std::move(v));
    }
    if (cols == 0) throw ParseError("empty trajectory file", 0);
    if (grid.times.size() >= 2) grid.delta_t = grid.times[1] - grid.times[0];
    return grid;
}

void write_zeta_csv(std::ostream& os, const ZetaScan& scan) {
    const Eigen::Index n = scan.cells.empty() ? 0 : scan.cells.front().alpha.size();
    const Eigen::Index k = scan.cells.empty() ? 0 : scan.cells.front().x.size();
    os << 't';
    for (Eigen::Index i = 0; i < n; ++i) os << ",alpha" << (i + 1);
    for (Eigen::Index i = 0; i < k; ++i) os << ",x" << (i + 1);
    os << ",zeta,flag\n";
    for (const ZetaCell& c : scan.cells) {
        os << format_double(c.t);
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_double(c.alpha(i));
        for (Eigen::Index i = 0; i < k; ++i) os << ',' << format_double(c.x(i));
        os << ',' << format_double(c.zeta) << ',' << static_cast<int>(c.flag) << '\n';
    }
}

json vec_to_json(const Vec& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(num_json(v(i)));
    return j;
}

Vec vec_from_json(const json& j) {
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num_or_nan(j[i]);
    return v;
}

json mat_to_json(const Mat& m) {
    json j = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vec_to_json(m.row(r).transpose()));
    return j;
}

Mat mat_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) throw ParseError("ragged matrix", 0);
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = num_or_nan(j[r][c]);
    }
    return m;
}

json complex_to_json(const Complex& c) { return json::array({c.real(), c.imag()}); }

void to_json(json& j, const InjectivityCertificate& c) {
    j = json{{"alpha0", vec_to_json(c.alpha0)},
             {"beta", c.beta},
             {"gamma", c.gamma},
             {"gamma_raw", c.gamma_raw},
             {"gamma_norm", c.gamma_norm},
             {"gamma_samples", c.gamma_samples},
             {"safety_factor", c.safety_factor},
             {"r_work", c.r_work},
             {"r_cert", c.r_cert},
             {"lipschitz_lower", c.lipschitz_lower},
             {"sigma_max", c.sigma_max},
             {"jacobian_rank", c.jacobian_rank},
             {"exact_derivatives", c.exact_derivatives},
             {"seed", c.seed}};
}

void from_json(const json& j, InjectivityCertificate& c) {
    c.alpha0 = vec_from_json(j.at("alpha0"));
    c.beta = j.at("beta").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.gamma_raw = j.at("gamma_raw").get<double>();
    c.gamma_norm = j.at("gamma_norm").get<std::string>();
    c.gamma_samples = j.at("gamma_samples").get<int>();
    c.safety_factor = j.at("safety_factor").get<double>();
    c.r_work = j.at("r_work").get<double>();
    c.r_cert = j.at("r_cert").get<double>();
    c.lipschitz_lower = j.at("lipschitz_lower").get<double>();
    c.sigma_max = j.at("sigma_max").get<double>();
    c.jacobian_rank = j.at("jacobian_rank").get<int>();
    c.exact_derivatives = j.at("exact_derivatives").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(json& j, const LowerBoundReport& r) {
    j = json{{"pairs_tested", r.pairs_tested},
             {"violations", r.violations},
             {"identical_pairs", r.identical_pairs},
             {"worst_ratio", num_json(r.worst_ratio)},
             {"required_ratio", r.required_ratio}};
}

void to_json(json& j, const DegeneracyReport& r) {
    json eig = json::array();
    for (const Complex& c : r.eigenvalues) eig.push_back(complex_to_json(c));
    json pairs = json::array();
    for (const AliasingPair& p : r.aliasing_pairs) pairs.push_back({{"i", p.i}, {"j", p.j}, {"k", p.k}});
    j = json{{"eigenvalues", eig},
             {"defective", r.defective},
             {"discriminant", num_json(r.discriminant)},
             {"discriminant_closed_form", r.discriminant_closed_form ? json(*r.discriminant_closed_form) : json()},
             {"closed_form_sign", r.closed_form_sign},
             {"closed_form_agrees", r.closed_form_agrees},
             {"double_eigenvalue", r.double_eigenvalue},
             {"aliasing_pairs", pairs},
             {"in_set_A", r.in_set_A},
             {"krylov_rank", r.krylov_rank},
             {"x0_in_E", r.x0_in_E},
             {"h", r.h}};
}

void to_json(json& j, const BranchSet& b) {
    json branches = json::array();
    for (std::size_t i = 0; i < b.branches.size(); ++i) {
        branches.push_back({{"matrix", mat_to_json(b.branches[i])}, {"shifts", b.shifts[i]}});
    }
    j = json{{"base", mat_to_json(b.base)}, {"h", b.h}, {"k_max", b.k_range}, {"count", b.branches.size()},
             {"branches", branches}};
}

void to_json(json& j, const FullRankCheck& f) {
    j = json{{"rank", f.rank}, {"sigma_min", f.sigma_min}, {"sigma_max", f.sigma_max}, {"full", f.full}};
}

void to_json(json& j, const EstimationResult& r) {
    json hist = json::array();
    for (const EstimationStep& s : r.history) hist.push_back({{"alpha", vec_to_json(s.alpha)}, {"residual", num_json(s.residual)}});
    j = json{{"alpha_hat", vec_to_json(r.alpha_hat)},
             {"residual", num_json(r.residual)},
             {"iterations", r.iterations},
             {"converged", r.converged},
             {"jacobian_rank", r.jacobian_rank},
             {"condition", num_json(r.condition)},
             {"rank_deficient", r.rank_deficient},
             {"step_norm", num_json(r.step_norm)},
             {"gradient_norm", num_json(r.gradient_norm)},
             {"history", hist}};
}

void from_json(const json& j, EstimationResult& r) {
    r.alpha_hat = vec_from_json(j.at("alpha_hat"));
    r.residual = num_or_nan(j.at("residual"));
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.jacobian_rank = j.at("jacobian_rank").get<int>();
    r.condition = j.at("condition").is_null() ? std::numeric_limits<double>::infinity() : j.at("condition").get<double>();
    r.rank_deficient = j.at("rank_deficient").get<bool>();
    r.step_norm = num_or_nan(j.at("step_norm"));
    r.gradient_norm = num_or_nan(j.at("gradient_norm"));
    r.history.clear();
    for (const json& s : j.at("history")) r.history.push_back({vec_from_json(s.at("alpha")), num_or_nan(s.at("residual"))});
}

}  // namespace odeident
