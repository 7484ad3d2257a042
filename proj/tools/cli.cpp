#include "cli.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "odeident/io.hpp"
#include "odeident/linearcase.hpp"

namespace odeident::cli {

namespace {

// ---------------------------------------------------------------------------
// YAML reading with line-numbered errors

class Reader {
public:
    explicit Reader(std::string path) : path_(std::move(path)) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
        const int line = at.Mark().line;
        throw ConfigError(path_ + ":" + (line >= 0 ? std::to_string(line + 1) : std::string("?")) + ": " + msg);
    }

    YAML::Node require(const YAML::Node& parent, const std::string& key, const std::string& dotted) const {
        YAML::Node n = parent[key];
        if (!n.IsDefined() || n.IsNull()) fail(parent, "missing required key '" + dotted + "'");
        return n;
    }

    YAML::Node block(const YAML::Node& parent, const std::string& key) const {
        YAML::Node n = parent[key];
        if (n.IsDefined() && !n.IsNull() && !n.IsMap()) fail(n, "'" + key + "' must be a mapping");
        return n;
    }

    void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) const {
        for (const auto& kv : map) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
        }
    }

    double num(const YAML::Node& n, const std::string& what) const {
        if (!n.IsScalar()) fail(n, what + " must be a number");
        try {
            return n.as<double>();
        } catch (const YAML::Exception&) {
            fail(n, what + " must be a number");
        }
    }

    long integer(const YAML::Node& n, const std::string& what) const {
        if (!n.IsScalar()) fail(n, what + " must be an integer");
        try {
            return n.as<long>();
        } catch (const YAML::Exception&) {
            fail(n, what + " must be an integer");
        }
    }

    std::uint64_t unsigned_int(const YAML::Node& n, const std::string& what) const {
        const long v = integer(n, what);
        if (v < 0) fail(n, what + " must be non-negative");
        return static_cast<std::uint64_t>(v);
    }

    std::vector<double> list(const YAML::Node& n, const std::string& what) const {
        if (!n.IsSequence()) fail(n, what + " must be a list of numbers");
        std::vector<double> out;
        for (const auto& e : n) out.push_back(num(e, what + " entry"));
        return out;
    }

    // Flat list, or (for matrices) a list of equal-length rows flattened row-major.
    Vec flat_vector(const YAML::Node& n, const std::string& what) const {
        if (!n.IsSequence()) fail(n, what + " must be a list");
        std::vector<double> vals;
        if (n.size() > 0 && n[0].IsSequence()) {
            const std::size_t cols = n[0].size();
            for (const auto& row : n) {
                if (!row.IsSequence() || row.size() != cols) fail(row, what + " rows must have equal length");
                for (const auto& e : row) vals.push_back(num(e, what + " entry"));
            }
        } else {
            vals = list(n, what);
        }
        return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    }

private:
    std::string path_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PolyMap parse_basis_map(const Reader& rd, const YAML::Node& node, int k, std::size_t index) {
    const std::string what = "system.basis[" + std::to_string(index) + "]";
    if (!node.IsSequence() || static_cast<int>(node.size()) != k) {
        rd.fail(node, what + " must list one monomial list per state component (k = " + std::to_string(k) + ")");
    }
    PolyMap map;
    for (const auto& comp : node) {
        if (!comp.IsSequence()) rd.fail(comp, what + " components must be lists of monomials");
        std::vector<Monomial> monos;
        for (const auto& mono : comp) {
            if (!mono.IsSequence() || static_cast<int>(mono.size()) != k + 1) {
                rd.fail(mono, what + " monomials are [coeff, e1, ..., ek] with k = " + std::to_string(k));
            }
            Monomial mn;
            mn.coeff = rd.num(mono[0], what + " coefficient");
            for (int e = 1; e <= k; ++e) {
                const long ex = rd.integer(mono[e], what + " exponent");
                if (ex < 0) rd.fail(mono[e], what + " exponents must be non-negative");
                mn.exponents.push_back(static_cast<int>(ex));
            }
            monos.push_back(std::move(mn));
        }
        map.components.push_back(std::move(monos));
    }
    return map;
}

Box parse_box(const Reader& rd, const YAML::Node& node, const std::string& what, int dim) {
    if (!node.IsMap()) rd.fail(node, what + " must be a mapping with lo and hi");
    rd.check_keys(node, {"lo", "hi"}, what);
    const auto lo = rd.list(rd.require(node, "lo", what + ".lo"), what + ".lo");
    const auto hi = rd.list(rd.require(node, "hi", what + ".hi"), what + ".hi");
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim) {
        rd.fail(node, what + " bounds must have " + std::to_string(dim) + " entries");
    }
    Box b{Vec(dim), Vec(dim)};
    for (int i = 0; i < dim; ++i) {
        if (!(lo[i] <= hi[i])) rd.fail(node, what + ": lo must not exceed hi");
        b.lo(i) = lo[i];
        b.hi(i) = hi[i];
    }
    return b;
}

// ---------------------------------------------------------------------------
// Command plumbing

void apply_seed(ExperimentConfig& cfg, const Options& opt) {
    if (opt.seed) {
        cfg.noise_seed = *opt.seed;
        cfg.solver_seed = *opt.seed;
    }
}

json header(const ExperimentConfig& cfg, const std::string& command) {
    return json{{"tool", kVersion}, {"config_digest", cfg.digest}, {"command", command}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(path + ": cannot open output file");
    out << text;
    if (!out) throw ConfigError(path + ": write failed");
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const YAML::Exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const NotIdentifiable& e) {
        err << "error: " << e.what() << '\n';
        return kNotIdentifiable;
    } catch (const IntegrationError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalFailure;
    }
}

void require_out(const Options& opt) {
    if (opt.out.empty()) throw ConfigError("--out is required");
}

}  // namespace

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

ParamSystem ExperimentConfig::system() const {
    return species == Species::MatrixLinear ? ParamSystem::matrix_linear(k) : ParamSystem::polynomial_basis(k, basis);
}

ObservationMap ExperimentConfig::observation_map() const { return ObservationMap(system(), x0, h, m, tol); }

ExperimentConfig load_config(const std::string& path) {
    const std::string text = read_file(path);
    ExperimentConfig cfg;
    cfg.path = path;
    cfg.digest = fnv1a64_hex(text);
    const Reader rd(path);

    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) throw ConfigError(path + ":1: top level must be a mapping");
    rd.check_keys(root, {"system", "observation", "noise", "solver", "zeta"}, "the top level");

    // system
    const YAML::Node sys = rd.require(root, "system", "system");
    if (!sys.IsMap()) rd.fail(sys, "'system' must be a mapping");
    rd.check_keys(sys, {"species", "k", "n", "alpha0", "x0", "basis"}, "system");
    const YAML::Node species = rd.require(sys, "species", "system.species");
    const auto sp = species.as<std::string>();
    if (sp == "matrix_linear") {
        cfg.species = Species::MatrixLinear;
    } else if (sp == "polynomial_basis") {
        cfg.species = Species::PolynomialBasis;
    } else {
        rd.fail(species, "system.species must be matrix_linear or polynomial_basis, got '" + sp + "'");
    }
    const YAML::Node knode = rd.require(sys, "k", "system.k");
    const long k = rd.integer(knode, "system.k");
    if (k < 1) rd.fail(knode, "system.k must be >= 1");
    cfg.k = static_cast<int>(k);

    if (cfg.species == Species::PolynomialBasis) {
        const YAML::Node basis = rd.require(sys, "basis", "system.basis");
        if (!basis.IsSequence() || basis.size() == 0) rd.fail(basis, "system.basis must be a non-empty list");
        for (std::size_t i = 0; i < basis.size(); ++i) cfg.basis.push_back(parse_basis_map(rd, basis[i], cfg.k, i));
        cfg.n = static_cast<int>(cfg.basis.size());
        try {
            (void)cfg.system();
        } catch (const Error& e) {
            rd.fail(basis, e.what());
        }
    } else {
        if (sys["basis"].IsDefined()) rd.fail(sys["basis"], "system.basis is only valid for polynomial_basis");
        cfg.n = cfg.k * cfg.k;
    }
    if (const YAML::Node nn = sys["n"]; nn.IsDefined()) {
        if (rd.integer(nn, "system.n") != cfg.n) {
            rd.fail(nn, "system.n = " + nn.as<std::string>() + " but the system has " + std::to_string(cfg.n) +
                            " parameters");
        }
    }

    const YAML::Node a0 = rd.require(sys, "alpha0", "system.alpha0");
    cfg.alpha0 = rd.flat_vector(a0, "system.alpha0");
    if (cfg.species == Species::MatrixLinear && a0.size() > 0 && a0[0].IsSequence() &&
        (static_cast<int>(a0.size()) != cfg.k || static_cast<int>(a0[0].size()) != cfg.k)) {
        rd.fail(a0, "system.alpha0 must be a " + std::to_string(cfg.k) + "x" + std::to_string(cfg.k) + " matrix");
    }
    if (cfg.alpha0.size() != cfg.n) {
        rd.fail(a0, "system.alpha0 has " + std::to_string(cfg.alpha0.size()) + " entries, expected " +
                        std::to_string(cfg.n));
    }
    const YAML::Node x0 = rd.require(sys, "x0", "system.x0");
    cfg.x0 = rd.flat_vector(x0, "system.x0");
    if (cfg.x0.size() != cfg.k) {
        rd.fail(x0, "system.x0 has " + std::to_string(cfg.x0.size()) + " entries, expected k = " +
                        std::to_string(cfg.k));
    }

    // observation
    const YAML::Node obs = rd.require(root, "observation", "observation");
    if (!obs.IsMap()) rd.fail(obs, "'observation' must be a mapping");
    rd.check_keys(obs, {"h", "m", "tol"}, "observation");
    const YAML::Node hn = rd.require(obs, "h", "observation.h");
    cfg.h = rd.num(hn, "observation.h");
    if (!(cfg.h > 0.0) || !std::isfinite(cfg.h)) rd.fail(hn, "observation.h must be positive");
    const YAML::Node mn = rd.require(obs, "m", "observation.m");
    const long m = rd.integer(mn, "observation.m");
    if (m < 1) rd.fail(mn, "observation.m must be >= 1");
    cfg.m = static_cast<int>(m);
    if (const YAML::Node t = obs["tol"]; t.IsDefined()) {
        cfg.tol = rd.num(t, "observation.tol");
        if (!(cfg.tol >= 1e-14 && cfg.tol <= 1e-3)) rd.fail(t, "observation.tol must lie in [1e-14, 1e-3]");
    }

    // noise
    if (const YAML::Node noise = rd.block(root, "noise"); noise.IsDefined() && !noise.IsNull()) {
        rd.check_keys(noise, {"sigma", "seed"}, "noise");
        if (const YAML::Node s = noise["sigma"]; s.IsDefined()) {
            cfg.noise_sigma = rd.num(s, "noise.sigma");
            if (!(cfg.noise_sigma >= 0.0)) rd.fail(s, "noise.sigma must be >= 0");
        }
        if (const YAML::Node s = noise["seed"]; s.IsDefined()) cfg.noise_seed = rd.unsigned_int(s, "noise.seed");
    }

    // solver
    if (const YAML::Node sol = rd.block(root, "solver"); sol.IsDefined() && !sol.IsNull()) {
        rd.check_keys(sol, {"r_work", "gamma_samples", "safety", "k_max", "pairs", "seed", "gauss_newton"}, "solver");
        if (const YAML::Node v = sol["r_work"]; v.IsDefined()) {
            cfg.r_work = rd.num(v, "solver.r_work");
            if (!(cfg.r_work > 0.0)) rd.fail(v, "solver.r_work must be positive");
        }
        if (const YAML::Node v = sol["gamma_samples"]; v.IsDefined()) {
            cfg.gamma_samples = static_cast<int>(rd.integer(v, "solver.gamma_samples"));
            if (cfg.gamma_samples < 10) rd.fail(v, "solver.gamma_samples must be >= 10");
        }
        if (const YAML::Node v = sol["safety"]; v.IsDefined()) {
            cfg.safety = rd.num(v, "solver.safety");
            if (!(cfg.safety >= 1.0)) rd.fail(v, "solver.safety must be >= 1");
        }
        if (const YAML::Node v = sol["k_max"]; v.IsDefined()) {
            cfg.k_max = static_cast<int>(rd.integer(v, "solver.k_max"));
            if (cfg.k_max < 0) rd.fail(v, "solver.k_max must be >= 0");
        }
        if (const YAML::Node v = sol["pairs"]; v.IsDefined()) {
            cfg.pairs = rd.integer(v, "solver.pairs");
            if (cfg.pairs < 1) rd.fail(v, "solver.pairs must be >= 1");
        }
        if (const YAML::Node v = sol["seed"]; v.IsDefined()) cfg.solver_seed = rd.unsigned_int(v, "solver.seed");
        if (const YAML::Node gn = rd.block(sol, "gauss_newton"); gn.IsDefined() && !gn.IsNull()) {
            rd.check_keys(gn, {"max_iter", "step_tol", "grad_tol", "damping", "init", "init_offset"},
                          "solver.gauss_newton");
            auto& o = cfg.gauss_newton;
            if (const YAML::Node v = gn["max_iter"]; v.IsDefined()) {
                o.max_iter = static_cast<int>(rd.integer(v, "gauss_newton.max_iter"));
                if (o.max_iter < 1) rd.fail(v, "gauss_newton.max_iter must be >= 1");
            }
            const auto positive = [&](const char* key, double& dst) {
                if (const YAML::Node v = gn[key]; v.IsDefined()) {
                    dst = rd.num(v, std::string("gauss_newton.") + key);
                    if (!(dst > 0.0)) rd.fail(v, std::string("gauss_newton.") + key + " must be positive");
                }
            };
            positive("step_tol", o.step_tol);
            positive("grad_tol", o.grad_tol);
            positive("damping", o.damping);
            const YAML::Node init = gn["init"];
            const YAML::Node offset = gn["init_offset"];
            if (init.IsDefined() && offset.IsDefined()) rd.fail(offset, "give either init or init_offset, not both");
            if (init.IsDefined() || offset.IsDefined()) {
                const YAML::Node& node = init.IsDefined() ? init : offset;
                Vec v = rd.flat_vector(node, "gauss_newton.init");
                if (v.size() != cfg.n) {
                    rd.fail(node, "gauss_newton initial point has " + std::to_string(v.size()) + " entries, expected " +
                                      std::to_string(cfg.n));
                }
                cfg.gn_init = init.IsDefined() ? v : Vec(cfg.alpha0 + v);
            }
        }
    }

    // zeta
    if (const YAML::Node z = rd.block(root, "zeta"); z.IsDefined() && !z.IsNull()) {
        rd.check_keys(z, {"t_values", "alpha_box", "x_box", "grid", "rank_tol"}, "zeta");
        ZetaBlock zb;
        const YAML::Node tv = rd.require(z, "t_values", "zeta.t_values");
        zb.t_values = rd.list(tv, "zeta.t_values");
        if (zb.t_values.empty()) rd.fail(tv, "zeta.t_values must not be empty");
        for (double t : zb.t_values) {
            if (!(t > 0.0)) rd.fail(tv, "zeta.t_values must be positive");
        }
        zb.alpha_box = parse_box(rd, rd.require(z, "alpha_box", "zeta.alpha_box"), "zeta.alpha_box", cfg.n);
        zb.x_box = parse_box(rd, rd.require(z, "x_box", "zeta.x_box"), "zeta.x_box", cfg.k);
        const YAML::Node g = rd.require(z, "grid", "zeta.grid");
        if (!g.IsSequence() || static_cast<int>(g.size()) != cfg.n + cfg.k) {
            rd.fail(g, "zeta.grid must list n + k = " + std::to_string(cfg.n + cfg.k) + " point counts");
        }
        for (const auto& e : g) {
            const long c = rd.integer(e, "zeta.grid entry");
            if (c < 1) rd.fail(e, "zeta.grid counts must be >= 1");
            zb.grid.push_back(static_cast<int>(c));
        }
        if (const YAML::Node v = z["rank_tol"]; v.IsDefined()) {
            zb.rank_tol = rd.num(v, "zeta.rank_tol");
            if (!(zb.rank_tol > 0.0)) rd.fail(v, "zeta.rank_tol must be positive");
        }
        cfg.zeta = std::move(zb);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const Options& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        require_out(opt);
        ExperimentConfig cfg = load_config(opt.config);
        apply_seed(cfg, opt);
        const Trajectory traj = integrate(cfg.system(), cfg.alpha0, cfg.x0, cfg.m * cfg.h, cfg.m, cfg.tol);
        ObservationGrid grid = ObservationGrid::from_trajectory(traj, false);
        if (cfg.noise_sigma > 0.0) grid = add_noise(grid, cfg.noise_sigma, cfg.noise_seed);
        std::ostringstream csv;
        write_trajectory_csv(csv, grid.times, grid.values);
        write_text(opt.out, csv.str());
        log << "simulate: " << grid.times.size() << " samples (sigma = " << cfg.noise_sigma << ") -> " << opt.out
            << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_certify(const Options& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        require_out(opt);
        ExperimentConfig cfg = load_config(opt.config);
        apply_seed(cfg, opt);
        const ObservationMap map = cfg.observation_map();
        json j = header(cfg, "certify");
        j["underdetermined"] = map.underdetermined();
        try {
            const InjectivityCertificate cert =
                certify_radius(map, cfg.alpha0, cfg.r_work, cfg.gamma_samples, cfg.safety, cfg.solver_seed);
            const LowerBoundReport ver = verify_lower_bound(map, cert, cfg.pairs, cfg.solver_seed);
            j["identifiable"] = true;
            j["certificate"] = cert;
            j["verification"] = ver;
            write_json(opt.out, j);
            log << "certify: beta = " << cert.beta << ", gamma = " << cert.gamma << ", r_cert = " << cert.r_cert
                << ", violations = " << ver.violations << "/" << ver.pairs_tested << '\n';
            return static_cast<int>(ver.violations == 0 ? kOk : kNumericalFailure);
        } catch (const NotIdentifiable& e) {
            j["identifiable"] = false;
            j["diagnostics"] = {{"beta", e.beta()},
                                {"sigma_max", e.sigma_max()},
                                {"jacobian_rank", e.rank()},
                                {"param_dim", map.param_dim()},
                                {"message", e.what()}};
            write_json(opt.out, j);
            err << "certify: not identifiable: " << e.what() << '\n';
            return static_cast<int>(kNotIdentifiable);
        }
    });
}

int cmd_analyze_linear(const Options& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        require_out(opt);
        ExperimentConfig cfg = load_config(opt.config);
        apply_seed(cfg, opt);
        if (cfg.species != Species::MatrixLinear) {
            throw ConfigError(cfg.path + ": analyze-linear needs system.species = matrix_linear");
        }
        const int k_max = opt.k_max.value_or(cfg.k_max);
        if (k_max < 0) throw ConfigError("--kmax must be >= 0");
        const Mat a = unflatten(cfg.alpha0, cfg.k);

        json j = header(cfg, "analyze-linear");
        const DegeneracyReport rep = degeneracy_report(a, cfg.x0, cfg.h);
        j["degeneracy"] = rep;

        j["branches"] = nullptr;
        if (rep.defective) {
            j["branches_omitted"] = "defective";
        } else {
            try {
                j["branches"] = log_branches(a, cfg.h, k_max);
            } catch (const PreconditionError& e) {
                j["branches_omitted"] = e.what();
            }
        }

        if (cfg.m * cfg.k >= cfg.k * cfg.k) {
            j["full_rank"] = full_rank_check(a, cfg.x0, cfg.h, cfg.m, cfg.tol);
        } else {
            j["full_rank"] = nullptr;
        }

        // Determinant identity at the scaled spectrum h * lambda.
        j["determinant_identity"] = nullptr;
        if (cfg.k >= 2) {
            std::vector<Complex> lam;
            for (const Complex& l : rep.eigenvalues) lam.push_back(cfg.h * l);
            try {
                const ExpDifferenceDeterminant d = exp_difference_determinant(lam);
                j["determinant_identity"] = {{"numeric", complex_to_json(d.numeric)},
                                             {"closed_form", complex_to_json(d.closed_form)},
                                             {"printed_sign", d.printed_sign},
                                             {"relative_gap", std::abs(d.numeric - d.closed_form) /
                                                                  std::max(std::abs(d.closed_form), 1e-300)}};
            } catch (const PreconditionError&) {
            }
        }
        write_json(opt.out, j);
        log << "analyze-linear: in_set_A = " << (rep.in_set_A ? "true" : "false")
            << ", aliasing pairs = " << rep.aliasing_pairs.size()
            << ", branches = " << (j["branches"].is_null() ? 0 : j["branches"]["count"].get<int>()) << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_invert(const Options& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        require_out(opt);
        if (opt.mode != "fd" && opt.mode != "gn") throw ConfigError("--mode must be fd or gn");
        ExperimentConfig cfg = load_config(opt.config);
        apply_seed(cfg, opt);
        if (opt.obs.empty()) throw ConfigError("--obs is required");
        std::ifstream in(opt.obs, std::ios::binary);
        if (!in) throw ConfigError(opt.obs + ": cannot open observation file");
        ObservationGrid grid;
        try {
            grid = read_trajectory_csv(in);
        } catch (const ParseError& e) {
            throw ConfigError(opt.obs + ": " + e.what());
        }
        if (grid.state_dim() != cfg.k) {
            throw ConfigError(opt.obs + ": observation has " + std::to_string(grid.state_dim()) +
                              " state columns, config has k = " + std::to_string(cfg.k));
        }

        EstimationResult res;
        if (opt.mode == "fd") {
            if (grid.times.size() < 3) {
                throw ConfigError(opt.obs + ": the central-difference estimator needs at least 3 rows");
            }
            res = fd_linear_estimate(grid, cfg.system().as_polynomial_basis());
        } else {
            if (!cfg.gn_init) throw ConfigError(cfg.path + ": mode gn needs solver.gauss_newton.init or init_offset");
            if (static_cast<int>(grid.times.size()) != cfg.m) {
                throw ConfigError(opt.obs + ": expected m = " + std::to_string(cfg.m) + " rows, found " +
                                  std::to_string(grid.times.size()));
            }
            Vec y(cfg.m * cfg.k);
            for (int r = 0; r < cfg.m; ++r) {
                const double t = (r + 1) * cfg.h;
                if (std::abs(grid.times[r] - t) > 1e-9 * std::max(1.0, t)) {
                    throw ConfigError(opt.obs + ":" + std::to_string(r + 2) + ": time " + format_double(grid.times[r]) +
                                      " is not on the grid j h");
                }
                y.segment(r * cfg.k, cfg.k) = grid.values[r];
            }
            res = gauss_newton_invert(cfg.observation_map(), y, *cfg.gn_init, cfg.gauss_newton);
        }

        json j = header(cfg, "invert");
        j["mode"] = opt.mode;
        j["alpha0"] = vec_to_json(cfg.alpha0);
        j["max_abs_error"] = (res.alpha_hat - cfg.alpha0).cwiseAbs().maxCoeff();
        j["result"] = res;
        write_json(opt.out, j);
        const bool ok = res.converged && !res.rank_deficient;
        log << "invert (" << opt.mode << "): residual = " << res.residual << ", iterations = " << res.iterations
            << ", converged = " << (res.converged ? "true" : "false") << '\n';
        if (!ok) err << "invert: estimate not converged or rank deficient\n";
        return static_cast<int>(ok ? kOk : kNotConverged);
    });
}

int cmd_zeta_scan(const Options& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        require_out(opt);
        ExperimentConfig cfg = load_config(opt.config);
        apply_seed(cfg, opt);
        if (!cfg.zeta) throw ConfigError(cfg.path + ": zeta-scan needs a 'zeta' block");
        const ZetaBlock& z = *cfg.zeta;
        const ZetaScan scan =
            zeta_scan(cfg.observation_map(), z.t_values, z.alpha_box, z.x_box, z.grid, z.rank_tol);
        std::ostringstream csv;
        write_zeta_csv(csv, scan);
        write_text(opt.out, csv.str());
        log << "zeta-scan: " << scan.cells.size() << " cells, flagged = " << scan.flagged
            << ", failed = " << scan.failed << ", flagged fraction = " << scan.flagged_fraction << '\n';
        return static_cast<int>(kOk);
    });
}

int run(const std::vector<std::string>& args, std::ostream& log, std::ostream& err) {
    CLI::App app{"Identifiability and parameter recovery for parameterized ODEs", "odeident"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Options opt;
    std::int64_t seed = -1;
    int k_max = -1;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "Experiment config (YAML)")->required();
        sub->add_option("--out", opt.out, "Output path")->required();
        sub->add_option("--seed", seed, "Seed override for noise and sampling")->check(CLI::NonNegativeNumber);
    };
    CLI::App* simulate = app.add_subcommand("simulate", "Write the sampled trajectory as CSV");
    CLI::App* certify = app.add_subcommand("certify", "Local injectivity certificate and its verification");
    CLI::App* analyze = app.add_subcommand("analyze-linear", "Degeneracy report and logarithm branches (x' = A x)");
    CLI::App* invert = app.add_subcommand("invert", "Estimate parameters from an observation CSV");
    CLI::App* zeta = app.add_subcommand("zeta-scan", "Scan det(J^T J) over a parameter/state lattice");
    for (CLI::App* sub : {simulate, certify, analyze, invert, zeta}) common(sub);
    analyze->add_option("--kmax", k_max, "Branch shift range |k| <= kmax")->check(CLI::NonNegativeNumber);
    invert->add_option("--obs", opt.obs, "Observation CSV")->required();
    invert->add_option("--mode", opt.mode, "fd (central differences) or gn (Gauss-Newton)")
        ->check(CLI::IsMember({"fd", "gn"}));

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, log, err);
        return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kInputError);
    }
    if (seed >= 0) opt.seed = static_cast<std::uint64_t>(seed);
    if (k_max >= 0) opt.k_max = k_max;

    if (simulate->parsed()) return cmd_simulate(opt, log, err);
    if (certify->parsed()) return cmd_certify(opt, log, err);
    if (analyze->parsed()) return cmd_analyze_linear(opt, log, err);
    if (invert->parsed()) return cmd_invert(opt, log, err);
    return cmd_zeta_scan(opt, log, err);
}

}  // namespace odeident::cli
