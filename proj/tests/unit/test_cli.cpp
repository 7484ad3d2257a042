#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "odeident/io.hpp"

namespace fs = std::filesystem;
using namespace odeident;

namespace {

const std::string kData = ODEIDENT_TEST_DATA;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("odeident_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "odeident");
    std::ostringstream out, err;
    return cli::run(args, out, err);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const std::string& path) { return json::parse(slurp(path)); }

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

}  // namespace

TEST_CASE("simulate writes m rows and is byte-reproducible") {
    TempDir tmp;
    const std::string cfg = tmp / "rot.yaml";
    write(cfg, R"(system:
  species: matrix_linear
  k: 2
  alpha0: [[0, 1], [-1, 0]]
  x0: [1, 0]
observation:
  h: 0.1
  m: 50
noise:
  sigma: 0
  seed: 3
)");
    CHECK(run({"simulate", "--config", cfg, "--out", tmp / "a.csv"}) == 0);
    CHECK(run({"simulate", "--config", cfg, "--out", tmp / "b.csv"}) == 0);
    const std::string a = slurp(tmp / "a.csv");
    CHECK(a == slurp(tmp / "b.csv"));
    std::istringstream is(a);
    const auto g = read_trajectory_csv(is);
    CHECK(g.times.size() == 50);
    CHECK(a.rfind("t,x1,x2\n", 0) == 0);
    CHECK(g.times.front() == doctest::Approx(0.1));
}

TEST_CASE("config validation errors exit 2 with a line number") {
    TempDir tmp;
    std::ostringstream out, err;
    CHECK(cli::run({"odeident", "simulate", "--config", kData + "/bad_k.yaml", "--out", tmp / "x.csv"}, out, err) ==
          2);
    CHECK(err.str().find("bad_k.yaml:5:") != std::string::npos);

    write(tmp / "missing.yaml", "system:\n  species: matrix_linear\n  k: 2\n  x0: [1, 0]\nobservation:\n  h: 1\n  m: 3\n");
    CHECK(run({"simulate", "--config", tmp / "missing.yaml", "--out", tmp / "x.csv"}) == 2);
    write(tmp / "typo.yaml", "system:\n  species: matrix_linear\n  k: 1\n  alpha0: [1]\n  x0: [1]\n  xo: [2]\n"
                             "observation:\n  h: 1\n  m: 3\n");
    CHECK(run({"simulate", "--config", tmp / "typo.yaml", "--out", tmp / "x.csv"}) == 2);
    CHECK(run({"simulate", "--config", tmp / "does_not_exist.yaml", "--out", tmp / "x.csv"}) == 2);
    CHECK(run({"frobnicate"}) == 2);
}

TEST_CASE("certify: decay, duplicated basis, rotation") {
    TempDir tmp;
    CHECK(run({"certify", "--config", kData + "/decay.yaml", "--out", tmp / "d.json"}) == 0);
    const json d = load_json(tmp / "d.json");
    CHECK(d["tool"] == cli::kVersion);
    CHECK(d["config_digest"].get<std::string>().size() == 16);
    CHECK(d["certificate"]["r_cert"].get<double>() > 0.0);
    CHECK(d["verification"]["violations"] == 0);

    CHECK(run({"certify", "--config", kData + "/duplicated.yaml", "--out", tmp / "dup.json"}) == 4);
    const json dup = load_json(tmp / "dup.json");
    CHECK(dup["identifiable"] == false);
    CHECK(dup["diagnostics"]["beta"].get<double>() < 1e-20);

    CHECK(run({"certify", "--config", kData + "/rotation.yaml", "--out", tmp / "r.json"}) == 0);
    const auto cert = load_json(tmp / "r.json")["certificate"].get<InjectivityCertificate>();
    CHECK(cert.alpha0.size() == 4);
    CHECK(cert.r_cert > 0.0);
}

TEST_CASE("analyze-linear") {
    TempDir tmp;
    CHECK(run({"analyze-linear", "--config", kData + "/rotation_h1.yaml", "--kmax", "2", "--out", tmp / "e1.json"}) ==
          0);
    CHECK(load_json(tmp / "e1.json")["branches"]["count"] == 5);

    CHECK(run({"analyze-linear", "--config", kData + "/diag12.yaml", "--out", tmp / "d.json"}) == 0);
    const json d = load_json(tmp / "d.json");
    CHECK(d["branches"]["count"] == 1);
    CHECK(mat_from_json(d["branches"]["branches"][0]["matrix"]) == mat_from_json(d["branches"]["base"]));

    CHECK(run({"analyze-linear", "--config", kData + "/rotation_2pi.yaml", "--out", tmp / "a.json"}) == 0);
    const json a = load_json(tmp / "a.json");
    CHECK(a["degeneracy"]["in_set_A"] == false);
    CHECK(a["degeneracy"]["aliasing_pairs"][0]["k"] == 2);

    CHECK(run({"analyze-linear", "--config", kData + "/jordan.yaml", "--out", tmp / "j.json"}) == 0);
    const json j = load_json(tmp / "j.json");
    CHECK(j["degeneracy"]["defective"] == true);
    CHECK(j["branches"].is_null());

    CHECK(run({"analyze-linear", "--config", kData + "/decay.yaml", "--out", tmp / "x.json"}) == 2);
}

TEST_CASE("invert: fd, gn and input errors") {
    TempDir tmp;
    REQUIRE(run({"simulate", "--config", kData + "/logistic.yaml", "--out", tmp / "log.csv"}) == 0);
    CHECK(run({"invert", "--config", kData + "/logistic.yaml", "--obs", tmp / "log.csv", "--mode", "fd", "--out",
               tmp / "fd.json"}) == 0);
    CHECK(load_json(tmp / "fd.json")["max_abs_error"].get<double>() <= 1e-3);

    REQUIRE(run({"simulate", "--config", kData + "/rotation.yaml", "--out", tmp / "rot.csv"}) == 0);
    CHECK(run({"invert", "--config", kData + "/rotation.yaml", "--obs", tmp / "rot.csv", "--mode", "gn", "--out",
               tmp / "gn.json"}) == 0);
    const json gn = load_json(tmp / "gn.json");
    CHECK(gn["max_abs_error"].get<double>() <= 1e-6);
    CHECK(gn["result"]["history"].size() >= 2);

    write(tmp / "two.csv", "t,x1\n0.01,0.1\n0.02,0.11\n");
    CHECK(run({"invert", "--config", kData + "/logistic.yaml", "--obs", tmp / "two.csv", "--mode", "fd", "--out",
               tmp / "x.json"}) == 2);
    write(tmp / "bad.csv", "t,x1\n0.01,0.1\n0.02,oops\n0.03,0.12\n");
    std::ostringstream out, err;
    CHECK(cli::run({"odeident", "invert", "--config", kData + "/logistic.yaml", "--obs", tmp / "bad.csv", "--out",
                    tmp / "x.json"},
                   out, err) == 2);
    CHECK(err.str().find("line 3") != std::string::npos);
    CHECK(run({"invert", "--config", kData + "/logistic.yaml", "--obs", tmp / "log.csv", "--mode", "xx", "--out",
               tmp / "x.json"}) == 2);

    // Constant data against a two-term basis: rank deficient, exit 5.
    write(tmp / "const.csv", "t,x1\n0.01,1\n0.02,1\n0.03,1\n0.04,1\n");
    CHECK(run({"invert", "--config", kData + "/logistic.yaml", "--obs", tmp / "const.csv", "--mode", "fd", "--out",
               tmp / "c.json"}) == 5);
    CHECK(load_json(tmp / "c.json")["result"]["rank_deficient"] == true);
}

TEST_CASE("zeta-scan") {
    TempDir tmp;
    CHECK(run({"zeta-scan", "--config", kData + "/logistic.yaml", "--out", tmp / "z.csv"}) == 0);
    const std::string z = slurp(tmp / "z.csv");
    CHECK(z.rfind("t,alpha1,alpha2,x1,zeta,flag\n", 0) == 0);
    CHECK(std::count(z.begin(), z.end(), '\n') == 1 + 1331);
    CHECK(run({"zeta-scan", "--config", kData + "/decay.yaml", "--out", tmp / "z2.csv"}) == 2);
}
