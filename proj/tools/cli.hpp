#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "odeident/errors.hpp"
#include "odeident/estimate.hpp"
#include "odeident/obsmap.hpp"
#include "odeident/ode.hpp"

namespace odeident::cli {

inline constexpr const char* kVersion = "odeident 0.1.0";

enum ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kNumericalFailure = 3,
    kNotIdentifiable = 4,
    kNotConverged = 5,
};

/// A config validation failure; `what()` starts with "path:line:".
class ConfigError : public Error {
public:
    using Error::Error;
};

struct ZetaBlock {
    std::vector<double> t_values;
    Box alpha_box;
    Box x_box;
    std::vector<int> grid;
    double rank_tol = 1e-10;
};

struct ExperimentConfig {
    std::string path;
    std::string digest;  // FNV-1a 64 of the file bytes, hex

    Species species = Species::MatrixLinear;
    int k = 0;
    int n = 0;
    std::vector<PolyMap> basis;
    Vec alpha0;
    Vec x0;

    double h = 0.0;
    int m = 0;
    double tol = 1e-10;

    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;

    double r_work = 0.1;
    int gamma_samples = 40;
    double safety = 1.5;
    int k_max = 2;
    long pairs = 10000;
    std::uint64_t solver_seed = 0;
    GaussNewtonOptions gauss_newton;
    std::optional<Vec> gn_init;

    std::optional<ZetaBlock> zeta;

    ParamSystem system() const;
    ObservationMap observation_map() const;
};

/// Reads and validates a YAML experiment config.
ExperimentConfig load_config(const std::string& path);

std::string fnv1a64_hex(const std::string& bytes);

struct Options {
    std::string config;
    std::string obs;
    std::string out;
    std::string mode = "fd";
    std::optional<int> k_max;
    std::optional<std::uint64_t> seed;
};

// Each command writes its report to `opt.out`, a one-line summary to `log`
// and diagnostics to `err`, and returns an ExitCode.
int cmd_simulate(const Options& opt, std::ostream& log, std::ostream& err);
int cmd_certify(const Options& opt, std::ostream& log, std::ostream& err);
int cmd_analyze_linear(const Options& opt, std::ostream& log, std::ostream& err);
int cmd_invert(const Options& opt, std::ostream& log, std::ostream& err);
int cmd_zeta_scan(const Options& opt, std::ostream& log, std::ostream& err);

/// Full command line (argv[0] included); returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& log, std::ostream& err);

}  // namespace odeident::cli
