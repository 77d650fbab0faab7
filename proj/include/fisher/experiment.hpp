#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fisher/generate.hpp"
#include "fisher/tatonnement.hpp"

namespace fisher {

struct NamedRun {
    std::string id;
    RunConfig config;
    bool record_prices = false;       // also emit the wide per-item price CSV
    bool floor_from_instance = false; // price_floor = floor, resolved per instance
};

// Parsed from a flat "key = value" file with '#' comments. Keys before the
// first "run = <id>" line configure the experiment, each "run" line opens a
// new run section. Unknown keys are errors.
struct ExperimentConfig {
    std::optional<std::filesystem::path> market_path;
    std::optional<SyntheticSpec> synthetic;
    double oracle_tol = 1e-10;
    long oracle_max_iter = 1000000;
    std::filesystem::path output_dir = ".";
    bool emit_plots = false;
    std::optional<double> epsilon;  // fills recommended_eta in theory.txt
    long plateau_window = 50;
    std::vector<NamedRun> runs;

    // compare-mode fields
    std::optional<double> base_eta;
    long compare_iterations = 0;
    long compare_record_every = 0;
    bool include_capped = false;
    bool include_floored = false;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct SummaryRow {
    std::string run_id;
    std::string variant;
    double eta = 0.0;
    double final_err_sq = 0.0;
    double plateau = 0.0;
    double slope = 0.0;
    double alpha = 0.0;    // NaN when the run's stepsize is not compliant
    double e_bound = 0.0;  // ditto
    long violations = 0;
};

struct ExperimentResult {
    PriceVector p_star;
    std::vector<SummaryRow> summary;  // sorted by run_id
    std::vector<std::filesystem::path> artifacts;
};

// Mean err_sq over the last `window` recorded points.
double plateau_estimate(const Trajectory& traj, std::size_t window);

// Least-squares slope of log(err_sq) against the iteration index over the
// recorded points with t in [t_start, t_end]. Needs at least three points
// with positive err_sq.
double slope_fit(const Trajectory& traj, long t_start, long t_end);

// Solves the oracle once, executes every run (worker pool, one thread per
// available core at most), and writes <run_id>.csv per run plus summary.csv,
// theory.txt, oracle.txt and optionally err_sq.svg into output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Runs the additive update at base_eta against the multiplicative and
// entropic updates at the rescaled stepsize m*eta/||B||_1 (optionally the
// capped and floored additive modifications too) and writes one trajectory
// CSV per variant, a combined long-format compare.csv and summary.csv.
ExperimentResult compare_variants(const ExperimentConfig& config);

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

// Minimal standalone SVG: err_sq (log scale) against iteration, one polyline
// per labeled series.
void write_errsq_svg(const std::vector<std::pair<std::string, const Trajectory*>>& series,
                     std::ostream& out);

}  // namespace fisher
