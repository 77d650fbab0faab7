#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fisher/experiment.hpp"

using namespace fisher;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in);
}

std::string parse_error_of(const std::string& text) {
    try {
        parse_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch_dir(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / "fisher_experiment_tests" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_diag2(const fs::path& dir) {
    MarketInstance inst({0.5, 0.5}, {1.0, 0.0, 0.0, 1.0}, 2, UtilityKind::Linear);
    fs::path path = dir / "diag2.market";
    save_instance(inst, path);
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Trajectory from_series(const std::vector<std::pair<long, double>>& series) {
    Trajectory traj;
    for (auto [t, err] : series) {
        TrajectoryPoint pt;
        pt.t = t;
        pt.err_sq = err;
        traj.points.push_back(pt);
    }
    return traj;
}

}  // namespace

TEST_CASE("config parser fills run sections and head scope") {
    ExperimentConfig cfg = parse_text(
        "# synthetic market\n"
        "dist = uniform01\n"
        "n = 3\n"
        "items = 4\n"
        "seed = 7\n"
        "epsilon = 0.01\n"
        "\n"
        "run = base\n"
        "variant = additive\n"
        "eta = 0.002\n"
        "iterations = 400\n"
        "record_every = 10\n"
        "\n"
        "run = floored\n"
        "eta = 0.001\n"
        "iterations = 100\n"
        "price_floor = floor\n"
        "record_prices = true\n");
    REQUIRE(cfg.synthetic.has_value());
    CHECK(cfg.synthetic->buyers == 3);
    CHECK(cfg.synthetic->items == 4);
    CHECK(cfg.synthetic->seed == 7);
    CHECK(cfg.epsilon == 0.01);
    REQUIRE(cfg.runs.size() == 2);
    CHECK(cfg.runs[0].id == "base");
    CHECK(cfg.runs[0].config.schedule.at(0) == 0.002);
    CHECK(cfg.runs[0].config.iterations == 400);
    CHECK(cfg.runs[0].config.record_every == 10);
    CHECK_FALSE(cfg.runs[0].floor_from_instance);
    CHECK(cfg.runs[1].floor_from_instance);
    CHECK(cfg.runs[1].record_prices);
    // unspecified record_every defaults to a ~5000 sample grid
    CHECK(cfg.runs[1].config.record_every == 1);
}

TEST_CASE("config parser rejects malformed input with line context") {
    const std::string head =
        "dist = uniform01\nn = 2\nm = 2\nseed = 1\n";
    const std::string run = "run = a\neta = 0.001\niterations = 10\n";

    CHECK(parse_error_of(head + "run = a\neta = 0.001\n").find("iterations is required") !=
          std::string::npos);
    CHECK(parse_error_of(head + "mystery = 1\n" + run).find("unknown experiment key") !=
          std::string::npos);
    CHECK(parse_error_of(head + run + "mystery = 1\n").find("unknown run key") !=
          std::string::npos);
    CHECK(parse_error_of(head + "seed = 2\n" + run).find("duplicate key 'seed'") !=
          std::string::npos);
    CHECK(parse_error_of("dist = uniform01\nn = 2\nm = 2\nseed = 1\nbuyers = 3\n" + run)
              .find("duplicate key") != std::string::npos);
    CHECK(parse_error_of(head + run + "eta = 0.002\n").find("duplicate key 'eta'") !=
          std::string::npos);
    CHECK(parse_error_of(head + run + "run = a\neta = 0.001\niterations = 10\n")
              .find("duplicate run id") != std::string::npos);
    CHECK(parse_error_of(head + "run = summary\neta = 0.001\niterations = 10\n")
              .find("collides") != std::string::npos);
    CHECK(parse_error_of(head + "run = bad id\neta = 0.001\niterations = 10\n")
              .find("[A-Za-z0-9_.-]") != std::string::npos);
    CHECK(parse_error_of(head + "market = x.market\n" + run)
              .find("mutually exclusive") != std::string::npos);
    CHECK(parse_error_of("dist = uniform01\nn = 2\nseed = 1\n" + run)
              .find("all of dist, n, m, seed") != std::string::npos);
    CHECK(parse_error_of(head + "base_eta = 0.001\n" + run)
              .find("mutually exclusive") != std::string::npos);
    CHECK(parse_error_of(head + "iterations = 10\n")
              .find("need base_eta") != std::string::npos);
    CHECK(parse_error_of(head + run + "cap_excess = maybe\n")
              .find("needs true/false") != std::string::npos);
    CHECK(parse_error_of(head + run + "horizon = 5\n")
              .find("only apply to the inv_sqrt schedules") != std::string::npos);
    CHECK(parse_error_of(head + "run = a\nschedule = inv_sqrt_t\niterations = 10\n")
              .find("needs coeff") != std::string::npos);
    CHECK(parse_error_of(head + run + "init_prices = 1 2\n")
              .find("init = explicit") != std::string::npos);
    CHECK(parse_error_of(head + "run = a\neta = nope\niterations = 10\n")
              .find("real number") != std::string::npos);
    CHECK(parse_error_of(head + "just words\n" + run)
              .find("expected 'key = value'") != std::string::npos);

    // error context carries the offending line number
    CHECK(parse_error_of(head + "mystery = 1\n" + run).find("line 5") != std::string::npos);
}

TEST_CASE("file loader prefixes the path and rejects missing files") {
    CHECK_THROWS_AS(load_experiment_config("nope.conf"), IoError);
    fs::path dir = scratch_dir("loader");
    fs::path conf = dir / "bad.conf";
    std::ofstream(conf) << "mystery = 1\n";
    try {
        load_experiment_config(conf);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.conf") != std::string::npos);
    }
}

TEST_CASE("plateau estimate averages the last window") {
    Trajectory traj = from_series({{0, 8.0}, {10, 4.0}, {20, 2.0}, {30, 1.0}});
    CHECK(plateau_estimate(traj, 1) == 1.0);
    CHECK(plateau_estimate(traj, 2) == 1.5);
    CHECK(plateau_estimate(traj, 4) == 3.75);
    CHECK_THROWS_AS(plateau_estimate(traj, 0), std::invalid_argument);
    CHECK_THROWS_AS(plateau_estimate(traj, 5), std::invalid_argument);
}

TEST_CASE("slope fit recovers an exact geometric decay rate") {
    // err_sq = 4 * exp(-0.03 t) sampled every 10 steps
    std::vector<std::pair<long, double>> series;
    for (long t = 0; t <= 100; t += 10) series.push_back({t, 4.0 * std::exp(-0.03 * t)});
    Trajectory traj = from_series(series);
    CHECK(slope_fit(traj, 0, 100) == doctest::Approx(-0.03).epsilon(1e-12));
    CHECK(slope_fit(traj, 20, 60) == doctest::Approx(-0.03).epsilon(1e-12));
    CHECK_THROWS_AS(slope_fit(traj, 60, 20), std::invalid_argument);
    CHECK_THROWS_AS(slope_fit(traj, 0, 10), std::invalid_argument);  // two points

    Trajectory flat = from_series({{0, 0.0}, {10, 0.0}, {20, 0.0}, {30, 0.0}});
    CHECK_THROWS_AS(slope_fit(flat, 0, 30), std::invalid_argument);  // nothing positive
}

TEST_CASE("run mode emits every artifact deterministically") {
    fs::path dir = scratch_dir("run_mode");
    fs::path market = write_diag2(dir);

    auto config_for = [&](const std::string& out) {
        return parse_text(
            "market = " + market.string() + "\n"
            "output_dir = " + (dir / out).string() + "\n"
            "epsilon = 0.01\n"
            "emit_plots = true\n"
            "plateau_window = 5\n"
            "run = steady\n"
            "variant = additive\n"
            "eta = 0.001\n"
            "iterations = 2000\n"
            "record_every = 50\n"
            "init = explicit\n"
            "init_prices = 0.75 0.25\n"
            "record_prices = true\n"
            "run = hot\n"
            "eta = 0.02\n"
            "iterations = 50\n"
            "record_every = 10\n");
    };

    ExperimentResult result = run_experiment(config_for("a"));
    REQUIRE(result.p_star.size() == 2);
    CHECK(result.p_star[0] == doctest::Approx(0.5).epsilon(1e-9));

    for (const char* name : {"steady.csv", "steady_prices.csv", "hot.csv", "summary.csv",
                             "theory.txt", "oracle.txt", "err_sq.svg"}) {
        CHECK(fs::exists(dir / "a" / name));
    }
    bool listed = false;
    for (const auto& artifact : result.artifacts) listed |= artifact.filename() == "summary.csv";
    CHECK(listed);

    std::string theory = slurp(dir / "a" / "theory.txt");
    CHECK(theory.find("alpha=") != std::string::npos);
    CHECK(theory.find("recommended_eta=") != std::string::npos);
    CHECK(slurp(dir / "a" / "oracle.txt").find("p_star=") != std::string::npos);
    CHECK(slurp(dir / "a" / "err_sq.svg").rfind("<svg", 0) == 0);
    CHECK(slurp(dir / "a" / "summary.csv").rfind("run_id,variant,eta,", 0) == 0);

    // rows come back sorted by id; the over-cap run reports no theory numbers
    REQUIRE(result.summary.size() == 2);
    CHECK(result.summary[0].run_id == "hot");
    CHECK(std::isnan(result.summary[0].alpha));
    CHECK(result.summary[1].run_id == "steady");
    CHECK(result.summary[1].alpha == doctest::Approx(0.24166725513734907).epsilon(1e-12));
    CHECK(result.summary[1].plateau <= result.summary[1].e_bound);
    CHECK(result.summary[1].violations == 0);

    // a second run into a fresh directory yields byte-identical artifacts
    run_experiment(config_for("b"));
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        CHECK(slurp(entry.path()) == slurp(dir / "b" / entry.path().filename()));
    }
}

TEST_CASE("run mode requires at least one run section") {
    fs::path dir = scratch_dir("empty_runs");
    ExperimentConfig cfg;
    cfg.market_path = write_diag2(dir);
    cfg.output_dir = dir;
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("run mode surfaces instance validation failures") {
    fs::path dir = scratch_dir("invalid_market");
    fs::path market = dir / "bad.market";
    std::ofstream(market) << "fisher 1\n2 2\n0.5 0.5\n1 0\n1 0\n";  // item 1 never valued
    ExperimentConfig cfg = parse_text(
        "market = " + market.string() + "\n"
        "output_dir = " + (dir / "out").string() + "\n"
        "run = a\neta = 0.001\niterations = 10\n");
    CHECK_THROWS_AS(run_experiment(cfg), ValidationError);
}

TEST_CASE("compare mode benchmarks the update rules on one stepsize scale") {
    fs::path dir = scratch_dir("compare_mode");
    fs::path market = write_diag2(dir);
    ExperimentConfig cfg = parse_text(
        "market = " + market.string() + "\n"
        "output_dir = " + (dir / "out").string() + "\n"
        "base_eta = 0.001\n"
        "iterations = 200\n"
        "record_every = 5\n"
        "include_capped = true\n");
    ExperimentResult result = compare_variants(cfg);

    REQUIRE(result.summary.size() == 4);
    CHECK(result.summary[0].run_id == "additive");
    CHECK(result.summary[1].run_id == "additive_capped");
    CHECK(result.summary[2].run_id == "entropic");
    CHECK(result.summary[3].run_id == "multiplicative");
    // multiplied by m/||B||_1 = 2, the proportional rules match the additive scale
    CHECK(result.summary[3].eta == 2.0 * 0.001);
    CHECK(result.summary[0].eta == 0.001);

    std::string cmp = slurp(dir / "out" / "compare.csv");
    CHECK(cmp.rfind("variant,t,err_sq\n", 0) == 0);
    CHECK(cmp.find("\nmultiplicative,0,") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out" / "theory.txt"));
    CHECK(fs::exists(dir / "out" / "oracle.txt"));

    ExperimentConfig with_runs = cfg;
    NamedRun named;
    named.id = "extra";
    with_runs.runs.push_back(named);
    CHECK_THROWS_AS(compare_variants(with_runs), ConfigError);

    ExperimentConfig no_eta = cfg;
    no_eta.base_eta.reset();
    CHECK_THROWS_AS(compare_variants(no_eta), ConfigError);
}
