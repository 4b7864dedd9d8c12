#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncmart/cli.hpp"
#include "ncmart/error.hpp"

using namespace ncmart;

namespace {

ExperimentConfig config(const std::string& name, std::uint64_t seed = 1) {
    ExperimentConfig c;
    c.experiment = name;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("slope fits") {
    std::vector<std::pair<double, double>> lin, sq;
    for (double x : {1.0, 3.0, 10.0, 30.0, 100.0}) {
        lin.emplace_back(x, x);
        sq.emplace_back(x, x * x);
    }
    auto s = fit_slope(lin);
    CHECK(s.slope == doctest::Approx(1.0));
    CHECK(s.stderr_ == doctest::Approx(0.0));
    CHECK(s.points == 5);
    CHECK(fit_slope(sq).slope == doctest::Approx(2.0));

    Rng rng(3);
    std::vector<std::pair<double, double>> noisy;
    for (int i = 0; i < 40; ++i) {
        const double x = std::pow(10.0, 0.1 * i);
        noisy.emplace_back(x, 3.0 * std::sqrt(x) * (1.0 + 0.01 * rng.normal()));
    }
    s = fit_slope(noisy);
    CHECK(std::abs(s.slope - 0.5) < 0.05);
    CHECK(s.intercept == doctest::Approx(std::log(3.0)).epsilon(0.05));

    CHECK_THROWS_AS(fit_slope({{1.0, 1.0}, {10.0, 2.0}}), ParameterError);
    CHECK_THROWS_AS(fit_slope({{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}}), ParameterError);
    // non-positive points are dropped before counting
    CHECK_THROWS_AS(fit_slope({{1.0, 1.0}, {10.0, 2.0}, {100.0, 0.0}}), ParameterError);
}

TEST_CASE("configuration parsing") {
    std::istringstream is(
        "# comment\n"
        "experiment = doob-sharpness\n"
        "seed = 18446744073709551615\n"
        "p = 3   # trailing\n"
        "weight-family = random-loguniform(0.5)\n"
        "trials=4\n"
        "n_iter = 7\n");
    const auto c = parse_config(is);
    CHECK(c.experiment == "doob-sharpness");
    CHECK(c.seed == 18446744073709551615ULL);
    CHECK(*c.p == 3.0);
    CHECK(*c.weight_family == "random-loguniform(0.5)");
    CHECK(*c.trials == 4);
    CHECK(c.get_int("n_iter", 0) == 7);
    CHECK(c.get("missing", 2.5) == 2.5);

    ExperimentConfig bad;
    CHECK_THROWS_AS(bad.set("p", "0.5"), ParameterError);
    CHECK_THROWS_AS(bad.set("d", "0"), ParameterError);
    CHECK_THROWS_AS(bad.set("trials", "x"), ParameterError);
    CHECK_THROWS_AS(bad.set("seed", "-1"), ParameterError);
    CHECK_THROWS_AS(bad.set("weight_family", "nope"), ParameterError);
    std::istringstream no_eq("p 2\n");
    CHECK_THROWS_AS(parse_config(no_eq), ParameterError);
}

TEST_CASE("weight family specs") {
    auto w = parse_weight_family("constant");
    CHECK(w.name == "constant");
    CHECK(!w.param);
    w = parse_weight_family("dyadic-power(0.125)");
    CHECK(w.name == "dyadic-power");
    CHECK(*w.param == 0.125);
    w = parse_weight_family("custom-file(/tmp/w.csv)");
    CHECK(w.path == "/tmp/w.csv");
    CHECK(parse_weight_family("random-logniform(2)").name == "random-loguniform");
    CHECK_THROWS_AS(parse_weight_family("random-loguniform(abc)"), ParameterError);
    CHECK_THROWS_AS(parse_weight_family("nonhomog(3"), ParameterError);
}

TEST_CASE("csv fields and numbers") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_number(0.1) == "0.10000000000000001");
    CHECK(csv_number(std::nan("")) == "nan");
    CHECK(csv_number(-INFINITY) == "-inf");
    CHECK(std::stod(csv_number(M_PI)) == M_PI);
}

TEST_CASE("registry and unknown experiments") {
    std::vector<std::string> names;
    for (const auto& e : experiment_registry()) names.push_back(e.name);
    for (const char* n : {"doob-sharpness", "dual-doob", "cuculescu-weak", "hl-maximal", "shift-bounds", "sparse-demo",
                          "factorize", "nonhomog-a1"})
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    CHECK_THROWS_AS(run_experiment(config("no-such")), ParameterError);
}

TEST_CASE("dual Doob at p = 1 holds on every row") {
    auto c = config("dual-doob", 5);
    c.trials = 40;
    const auto r = run_experiment(c);
    CHECK(r.ok());
    CHECK(r.rows.size() == 40);
    for (const auto& row : r.rows) {
        CHECK(row.bound_ok);
        CHECK(row.lhs <= row.rhs * (1.0 + 1e-9));
    }
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i - 1].characteristic <= r.rows[i].characteristic);
}

TEST_CASE("nonhomogeneous weight row") {
    const auto r = run_experiment(config("nonhomog-a1"));
    REQUIRE(r.rows.size() == 1);
    CHECK(r.ok());
    CHECK(r.rows[0].characteristic <= 2.0);
    CHECK(r.rows[0].characteristic == doctest::Approx(1.8576862373737));
}

TEST_CASE("deterministic output and timing column") {
    auto c = config("cuculescu-weak", 9);
    c.trials = 10;
    const auto a = to_csv(run_experiment(c));
    const auto b = to_csv(run_experiment(c));
    CHECK(a == b);
    CHECK(a.rfind("experiment,trial,seed,characteristic,lhs,rhs,ratio,bound_ok,", 0) == 0);
    c.seed = 10;
    CHECK(to_csv(run_experiment(c)) != a);

    c.timing = true;
    const auto t = run_experiment(c);
    bool any = false;
    for (const auto& row : t.rows) any = any || row.elapsed_ms > 0.0;
    CHECK(any);
}

TEST_CASE("output files") {
    auto c = config("nonhomog-a1");
    const auto r = run_experiment(c);
    const auto dir = std::filesystem::temp_directory_path() / "ncmart_test_cli";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "out.csv").string();
    write_outputs(r, path);
    std::ifstream in(path), sum(path + ".summary.csv");
    std::stringstream a, b;
    a << in.rdbuf();
    b << sum.rdbuf();
    CHECK(a.str() == to_csv(r));
    CHECK(b.str() == summary_csv(r));
    CHECK_THROWS_AS(write_outputs(r, (dir / "missing" / "x.csv").string()), ParameterError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("Doob sharpness sweep slope") {
    auto c = config("doob-sharpness");
    c.trials = 9;
    const auto r = run_experiment(c);
    CHECK(r.ok());
    REQUIRE(r.slope);
    MESSAGE("slope " << r.slope->slope << " +- " << r.slope->stderr_);
    CHECK(r.slope->slope >= 0.85);
    CHECK(r.slope->slope <= 1.15);
}
