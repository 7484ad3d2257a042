#include <doctest.h>

#include <cmath>
#include <sstream>

#include "odeident/errors.hpp"
#include "odeident/io.hpp"

using namespace odeident;

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("trajectory CSV round-trips exactly") {
    std::vector<double> t{0.1, 0.2, 0.30000000000000004};
    std::vector<Vec> x;
    for (int i = 0; i < 3; ++i) x.push_back(Vec::Constant(2, std::exp(-0.37 * i) / 3.0));
    std::ostringstream os;
    write_trajectory_csv(os, t, x);
    CHECK(os.str().rfind("t,x1,x2\n", 0) == 0);
    std::istringstream is(os.str());
    const auto g = read_trajectory_csv(is);
    REQUIRE(g.times.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(g.times[i] == t[i]);
        CHECK(g.values[i] == x[i]);
    }
}

TEST_CASE("trajectory CSV errors carry line numbers") {
    std::istringstream bad_header("time,x1\n0.1,1\n");
    CHECK_THROWS_AS(read_trajectory_csv(bad_header), ParseError);

    std::istringstream short_row("t,x1,x2\n0.1,1,2\n0.2,1\n");
    try {
        read_trajectory_csv(short_row);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    std::istringstream nan_row("t,x1\n0.1,abc\n");
    try {
        read_trajectory_csv(nan_row);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    std::istringstream empty("");
    CHECK_THROWS_AS(read_trajectory_csv(empty), ParseError);
}

TEST_CASE("JSON round trips") {
    InjectivityCertificate c;
    c.alpha0 = Vec::Constant(2, 0.25);
    c.beta = 1.5;
    c.gamma = 3.0;
    c.gamma_raw = 2.0;
    c.r_work = 0.1;
    c.r_cert = 0.05;
    c.lipschitz_lower = std::sqrt(1.5) / 2;
    c.gamma_samples = 40;
    c.safety_factor = 1.5;
    c.seed = 99;
    const json j = c;
    const auto back = j.get<InjectivityCertificate>();
    CHECK(back.alpha0 == c.alpha0);
    CHECK(back.r_cert == c.r_cert);
    CHECK(back.seed == 99);
    CHECK(back.gamma_norm == c.gamma_norm);

    EstimationResult r;
    r.alpha_hat = Vec::Constant(1, -0.5);
    r.residual = 1e-12;
    r.condition = std::numeric_limits<double>::infinity();
    r.rank_deficient = true;
    r.history.push_back({Vec::Constant(1, -0.4), 0.3});
    const json jr = r;
    CHECK(jr["condition"].is_null());
    const auto rb = json::parse(jr.dump()).get<EstimationResult>();
    CHECK(std::isinf(rb.condition));
    CHECK(rb.history.size() == 1);
    CHECK(rb.history[0].residual == 0.3);

    CHECK(mat_from_json(mat_to_json(Mat::Identity(2, 3))) == Mat::Identity(2, 3));
}
