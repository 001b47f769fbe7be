#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "kinlab/harness.hpp"
#include "kinlab/io_util.hpp"
#include "kinlab/rng.hpp"

using namespace kinlab;

namespace {

std::string tmp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) { return read_file(path); }

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> argv_s;
    argv_s.push_back("kinlab");
    argv_s.insert(argv_s.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_s) argv.push_back(s.data());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

ExperimentConfig tiny_zdecay() {
    auto cfg = ExperimentConfig::defaults("zdecay");
    cfg.n_ladder = {16, 32};
    cfg.replicas = 2;
    cfg.sim.T = 0.25;
    cfg.sim.snapshot_count = 9;  // keeps the snapshot gap grid-aligned
    cfg.residual_time = 0.25;    // unused here but validated against sim.T
    return cfg;
}

}  // namespace

TEST_CASE("slope fit: exact laws, noisy band, rejections") {
    std::vector<std::pair<double, double>> exact;
    for (double n : {16.0, 64.0, 256.0, 1024.0}) exact.push_back({n, 3.0 / std::sqrt(n)});
    const auto f = fit_slope(exact);
    CHECK(std::fabs(f.slope + 0.5) < 1e-12);
    CHECK(std::fabs(f.intercept - std::log(3.0)) < 1e-12);
    CHECK(f.ci < 1e-10);

    std::vector<std::pair<double, double>> flat = {{8, 2.0}, {16, 2.0}, {32, 2.0}, {64, 2.0}};
    CHECK(std::fabs(fit_slope(flat).slope) < 1e-14);

    // deterministic multiplicative wobble around n^{-1/2}
    const std::vector<double> wobble = {1.01, 0.99, 1.008, 0.993, 1.004};
    std::vector<std::pair<double, double>> noisy;
    for (std::size_t k = 0; k < wobble.size(); ++k) {
        const double n = 16.0 * std::pow(4.0, static_cast<double>(k));
        noisy.push_back({n, wobble[k] / std::sqrt(n)});
    }
    const auto g = fit_slope(noisy);
    CHECK(std::fabs(g.slope + 0.5) < 0.02);
    CHECK(g.ci > 0.0);
    CHECK(std::fabs(g.slope + 0.5) < g.ci);

    CHECK_THROWS_AS(fit_slope({{8, 1.0}, {16, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_slope({{8, 1.0}, {8, 0.9}, {8, 1.1}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_slope({{8, 1.0}, {16, -0.5}, {32, 0.2}}), std::invalid_argument);
}

TEST_CASE("spearman rank correlation handles order, reversal, and ties") {
    CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman_rho({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
    CHECK(spearman_rho({1, 1, 1, 1}, {1, 2, 3, 4}) == 0.0);
    CHECK(spearman_rho({1, 2, 2, 3}, {5, 6, 6, 7}) == doctest::Approx(1.0));

    Rng rng(1234);
    std::vector<double> a(200), b(200);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    CHECK(std::fabs(spearman_rho(a, b)) < 0.2);
}

TEST_CASE("config defaults, json round trip, and hash stability") {
    for (const char* name : {"lln", "zdecay", "mild-residual"}) {
        const auto cfg = ExperimentConfig::defaults(name);
        CHECK_NOTHROW(cfg.validate());
        const auto text = config_to_json(cfg);
        const auto back = config_from_json(text);
        CHECK(config_to_json(back) == text);
        CHECK(config_hash(back) == config_hash(cfg));
    }

    const auto base = ExperimentConfig::defaults("lln");
    CHECK(config_to_json(config_from_json("{\"experiment\": \"lln\"}")) == config_to_json(base));

    auto moved = base;
    moved.out_dir = "elsewhere";
    moved.threads = 7;
    CHECK(config_hash(moved) == config_hash(base));
    auto changed = base;
    changed.master_seed = 99;
    CHECK(config_hash(changed) != config_hash(base));

    CHECK_THROWS_AS(config_from_json("{not json"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json("{\"experiment\": \"unknown\"}"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json("{\"n_ladder\": [64, 64]}"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_file("/definitely/not/there.json"), std::invalid_argument);
}

TEST_CASE("config validation rejects inadmissible orders and grids") {
    auto cfg = ExperimentConfig::defaults("lln");
    cfg.order.s = 3.0;  // dual-admissible needs s > 2, lln needs s > 5
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig::defaults("zdecay");
    cfg.order.s = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig::defaults("zdecay");
    cfg.n_xi = 16;  // even
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig::defaults("zdecay");
    cfg.replicas = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig::defaults("mild-residual");
    cfg.residual_time = 2.0 * cfg.sim.T;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig::defaults("mild-residual");
    cfg.dt_ladder = {4e-3, -1e-3};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("decay study reruns are byte-identical and structurally sound") {
    const auto cfg = tiny_zdecay();
    const auto r1 = run_zdecay(cfg);
    const auto r2 = run_zdecay(cfg);

    REQUIRE(r1.n_values == std::vector<std::size_t>{16, 32});
    REQUIRE(r1.errors.size() == 2);
    for (const auto& row : r1.errors) {
        REQUIRE(row.size() == 2);
        for (double e : row) CHECK(e > 0.0);
    }
    CHECK(r1.means.size() == 2);
    CHECK(r1.stderrs.size() == 2);
    CHECK(r1.config_hash == config_hash(cfg));

    const auto d1 = tmp_dir("kinlab_h_rep1");
    const auto d2 = tmp_dir("kinlab_h_rep2");
    write_report(r1, d1);
    write_report(r2, d2);
    for (const char* f : {"report.json", "replica_errors.csv", "aggregates.csv"})
        CHECK(slurp(d1 + "/" + f) == slurp(d2 + "/" + f));

    // distinct (n, replica) pairs get distinct derived seeds
    CHECK(r1.seeds[0][0] != r1.seeds[0][1]);
    CHECK(r1.seeds[0][0] != r1.seeds[1][0]);

    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("identity-residual study shrinks with the step and replays bitwise") {
    auto cfg = ExperimentConfig::defaults("mild-residual");
    cfg.sim.T = 0.5;
    cfg.residual_time = 0.5;
    cfg.dt_ladder = {1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0};
    cfg.master_seed = 23;
    const auto rep = run_mild_residual(cfg);
    REQUIRE(rep.residuals.size() == 3);
    CHECK(rep.dts == std::vector<double>{1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0});
    for (double r : rep.residuals) CHECK(r > 0.0);
    CHECK(rep.finest_over_coarsest == rep.residuals.back() / rep.residuals.front());

    const auto rep2 = run_mild_residual(cfg);
    CHECK(rep2.residuals == rep.residuals);

    const auto dir = tmp_dir("kinlab_h_res");
    write_residual_report(rep, dir);
    CHECK(slurp(dir + "/report.json").find("\"experiment\": \"mild-residual\"") !=
          std::string::npos);
    CHECK(slurp(dir + "/residuals.csv").rfind("dt,residual,lhs,initial,drift,noise", 0) == 0);
    std::filesystem::remove_all(dir);

    auto bad = cfg;
    bad.dt_ladder = {1.0 / 64.0, 1.0 / 96.0};  // not an integer refinement of the finest
    CHECK_THROWS_AS(run_mild_residual(bad), std::invalid_argument);
}

TEST_CASE("cli: subcommand dispatch, outputs, and error exit codes") {
    CHECK(run_cli({"definitely-not-a-command"}) == 1);
    CHECK(run_cli({"lln", "--config", "/nonexistent.json"}) == 1);
    CHECK(run_cli({"norm", "/nonexistent.csv", "--time", "1.0"}) == 1);

    const auto dir = tmp_dir("kinlab_h_cli");
    const auto cfg_path = dir + "/config.json";
    {
        std::ofstream out(cfg_path);
        out << "{\"experiment\": \"lln\", \"sim\": {\"N\": 8, \"T\": 0.5, \"dt\": 0.03125, "
               "\"snapshot_count\": 5}}\n";
    }
    CHECK(run_cli({"simulate", "--config", cfg_path, "--out", dir, "--seed", "3"}) == 0);
    CHECK(std::filesystem::exists(dir + "/path.csv"));
    CHECK(std::filesystem::exists(dir + "/increments.bin"));

    CHECK(run_cli({"norm", dir + "/path.csv", "--time", "0.5"}) == 0);
    CHECK(run_cli({"norm", dir + "/path.csv"}) == 0);  // defaults to the last snapshot
    CHECK(run_cli({"norm", dir + "/path.csv", "--time", "0.33"}) == 1);

    {
        std::ofstream out(cfg_path);
        out << "{broken\n";
    }
    CHECK(run_cli({"simulate", "--config", cfg_path}) == 1);
    std::filesystem::remove_all(dir);
}
