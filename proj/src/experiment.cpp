#include "fisher/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fisher/dual.hpp"
#include "fisher/equilibrium.hpp"

namespace fs = std::filesystem;

namespace fisher {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string ctx(long line) { return "config line " + std::to_string(line) + ": "; }

bool parse_bool_value(const std::string& v, long line, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(ctx(line) + "key '" + key + "' needs true/false, got '" + v + "'");
}

long parse_long_value(const std::string& v, long line, const std::string& key) {
    long out = 0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end)
        throw ConfigError(ctx(line) + "key '" + key + "' needs an integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_u64_value(const std::string& v, long line, const std::string& key) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end)
        throw ConfigError(ctx(line) + "key '" + key + "' needs an unsigned integer, got '" + v + "'");
    return out;
}

double parse_real_value(const std::string& v, long line, const std::string& key) {
    try {
        return parse_real(v);
    } catch (const MarketError&) {
        throw ConfigError(ctx(line) + "key '" + key + "' needs a real number, got '" + v + "'");
    }
}

std::vector<double> parse_real_list(const std::string& v, long line, const std::string& key) {
    std::vector<double> out;
    std::istringstream in(v);
    std::string tok;
    while (in >> tok) out.push_back(parse_real_value(tok, line, key));
    if (out.empty())
        throw ConfigError(ctx(line) + "key '" + key + "' needs at least one real number");
    return out;
}

bool valid_run_id(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Additive: return "additive";
        case Variant::Multiplicative: return "multiplicative";
        case Variant::Entropic: return "entropic";
    }
    return "additive";
}

// Raw key = value entries of one run section, interpreted after the whole
// file is read so later keys of the section are visible.
struct RunDraft {
    NamedRun named;
    long line = 0;  // line of the "run =" header, for error context
    std::string schedule_name = "constant";
    std::optional<double> eta;
    std::optional<long> horizon;
    std::optional<double> coeff;
    std::optional<long> iterations;
    std::optional<long> record_every;
    std::optional<std::string> floor_text;
    long floor_line = 0;
};

void apply_run_key(RunDraft& d, const std::string& key, const std::string& value, long line) {
    RunConfig& cfg = d.named.config;
    if (key == "variant") {
        if (value == "additive")
            cfg.variant = Variant::Additive;
        else if (value == "multiplicative")
            cfg.variant = Variant::Multiplicative;
        else if (value == "entropic")
            cfg.variant = Variant::Entropic;
        else
            throw ConfigError(ctx(line) + "unknown variant '" + value + "'");
    } else if (key == "schedule") {
        if (value != "constant" && value != "inv_sqrt_horizon" && value != "inv_sqrt_t")
            throw ConfigError(ctx(line) + "unknown schedule '" + value + "'");
        d.schedule_name = value;
    } else if (key == "eta") {
        double eta = parse_real_value(value, line, key);
        if (!(eta > 0.0) || !std::isfinite(eta))
            throw ConfigError(ctx(line) + "eta must be a positive real");
        d.eta = eta;
    } else if (key == "horizon") {
        long horizon = parse_long_value(value, line, key);
        if (horizon < 1) throw ConfigError(ctx(line) + "horizon must be at least 1");
        d.horizon = horizon;
    } else if (key == "coeff") {
        double coeff = parse_real_value(value, line, key);
        if (!(coeff > 0.0) || !std::isfinite(coeff))
            throw ConfigError(ctx(line) + "coeff must be a positive real");
        d.coeff = coeff;
    } else if (key == "iterations") {
        long iters = parse_long_value(value, line, key);
        if (iters < 0) throw ConfigError(ctx(line) + "iterations must be nonnegative");
        d.iterations = iters;
    } else if (key == "record_every") {
        long every = parse_long_value(value, line, key);
        if (every < 1) throw ConfigError(ctx(line) + "record_every must be at least 1");
        d.record_every = every;
    } else if (key == "tie_break") {
        if (value == "smallest_index")
            cfg.tie_break.rule = TieBreak::SmallestIndex;
        else if (value == "uniform_split")
            cfg.tie_break.rule = TieBreak::UniformSplit;
        else if (value == "proportional_to_value")
            cfg.tie_break.rule = TieBreak::ProportionalToValue;
        else
            throw ConfigError(ctx(line) + "unknown tie_break '" + value + "'");
    } else if (key == "ql_indifference") {
        if (value == "spend_all")
            cfg.tie_break.ql_indifference = QlIndifference::SpendAll;
        else if (value == "spend_nothing")
            cfg.tie_break.ql_indifference = QlIndifference::SpendNothing;
        else
            throw ConfigError(ctx(line) + "unknown ql_indifference '" + value + "'");
    } else if (key == "mbb_rel_tol") {
        double tol = parse_real_value(value, line, key);
        if (!(tol >= 0.0) || !std::isfinite(tol))
            throw ConfigError(ctx(line) + "mbb_rel_tol must be a nonnegative real");
        cfg.tie_break.mbb_rel_tol = tol;
    } else if (key == "cap_excess") {
        cfg.cap_excess = parse_bool_value(value, line, key);
    } else if (key == "price_floor") {
        d.floor_text = value;
        d.floor_line = line;
    } else if (key == "init") {
        if (value == "uniform_budget")
            cfg.init = InitKind::UniformBudget;
        else if (value == "floor_vector")
            cfg.init = InitKind::FloorVector;
        else if (value == "explicit")
            cfg.init = InitKind::Explicit;
        else
            throw ConfigError(ctx(line) + "unknown init '" + value + "'");
    } else if (key == "init_prices") {
        cfg.explicit_init = parse_real_list(value, line, key);
    } else if (key == "record_prices") {
        d.named.record_prices = parse_bool_value(value, line, key);
    } else {
        throw ConfigError(ctx(line) + "unknown run key '" + key + "'");
    }
}

NamedRun finalize_run(RunDraft& d) {
    RunConfig& cfg = d.named.config;
    const std::string where = "run '" + d.named.id + "': ";
    if (!d.iterations) throw ConfigError(where + "iterations is required");
    cfg.iterations = *d.iterations;

    if (d.schedule_name == "constant") {
        if (!d.eta) throw ConfigError(where + "a constant schedule needs eta");
        if (d.horizon || d.coeff)
            throw ConfigError(where + "horizon/coeff only apply to the inv_sqrt schedules");
        cfg.schedule = Schedule::constant(*d.eta);
    } else if (d.schedule_name == "inv_sqrt_horizon") {
        if (d.eta || d.coeff)
            throw ConfigError(where + "eta/coeff do not apply to inv_sqrt_horizon");
        long horizon = d.horizon ? *d.horizon : std::max<long>(1, cfg.iterations);
        cfg.schedule = Schedule::inv_sqrt_horizon(horizon);
    } else {  // inv_sqrt_t
        if (!d.coeff) throw ConfigError(where + "inv_sqrt_t needs coeff");
        if (d.eta || d.horizon)
            throw ConfigError(where + "eta/horizon do not apply to inv_sqrt_t");
        cfg.schedule = Schedule::inv_sqrt_t(*d.coeff);
    }

    cfg.record_every = d.record_every ? *d.record_every : std::max<long>(1, cfg.iterations / 5000);

    if (d.floor_text && *d.floor_text != "none") {
        if (*d.floor_text == "floor") {
            d.named.floor_from_instance = true;
        } else {
            std::vector<double> floor = parse_real_list(*d.floor_text, d.floor_line, "price_floor");
            for (double f : floor)
                if (!(f >= 0.0) || !std::isfinite(f))
                    throw ConfigError(where + "price_floor entries must be nonnegative reals");
            cfg.price_floor = std::move(floor);
        }
    }

    if (cfg.init == InitKind::Explicit && cfg.explicit_init.empty())
        throw ConfigError(where + "init = explicit needs init_prices");
    if (cfg.init != InitKind::Explicit && !cfg.explicit_init.empty())
        throw ConfigError(where + "init_prices needs init = explicit");
    return std::move(d.named);
}

MarketInstance resolve_instance(const ExperimentConfig& config) {
    if (config.market_path && config.synthetic)
        throw ConfigError("market file and synthetic generator are mutually exclusive");
    std::optional<MarketInstance> inst;
    if (config.market_path)
        inst = load_instance(*config.market_path);
    else if (config.synthetic)
        inst = generate_synthetic(*config.synthetic);
    else
        throw ConfigError("config names neither a market file nor a generator");
    ValidationReport report = validate_instance(*inst);
    if (!report.ok()) throw ValidationError("market rejected: " + report.violations.front());
    return std::move(*inst);
}

// Runs are independent, so they execute on a small pool; results land in
// their slots and the first failure (in run order) is rethrown after join.
void execute_runs(const MarketInstance& inst, const std::vector<NamedRun>& runs,
                  const PriceVector& p_star, std::vector<Trajectory>& out) {
    out.assign(runs.size(), Trajectory{});
    std::vector<std::exception_ptr> errors(runs.size());
    std::atomic<std::size_t> next{0};
    auto body = [&]() {
        for (;;) {
            std::size_t k = next.fetch_add(1, std::memory_order_relaxed);
            if (k >= runs.size()) break;
            try {
                out[k] = run(inst, runs[k].config, &p_star);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::size_t workers = std::max<unsigned>(1, std::thread::hardware_concurrency());
    workers = std::min(workers, runs.size());
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& th : pool) th.join();
    }
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

std::ofstream open_artifact(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

void close_artifact(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

// Fit segment: from the start until err_sq first dips into 1.5x the plateau,
// where the geometric decay phase ends.
double summary_slope(const Trajectory& traj, double plateau) {
    if (traj.points.empty()) return kNaN;
    double thresh = 1.5 * plateau;
    long t_end = traj.points.back().t;
    for (const auto& pt : traj.points)
        if (pt.err_sq <= thresh) {
            t_end = pt.t;
            break;
        }
    try {
        return slope_fit(traj, traj.points.front().t, t_end);
    } catch (const std::invalid_argument&) {
        return kNaN;
    }
}

SummaryRow make_row(const NamedRun& named, const Trajectory& traj, const MarketInstance& inst,
                    const PriceVector& p_star, long plateau_window, double stepsize_cap) {
    SummaryRow row;
    row.run_id = named.id;
    row.variant = variant_name(named.config.variant);
    row.eta = traj.max_eta;
    row.final_err_sq = traj.points.empty() ? kNaN : traj.points.back().err_sq;
    row.plateau = kNaN;
    if (!traj.points.empty()) {
        std::size_t window = std::min(traj.points.size(),
                                      static_cast<std::size_t>(std::max<long>(1, plateau_window)));
        row.plateau = plateau_estimate(traj, window);
    }
    row.slope = summary_slope(traj, row.plateau);
    row.alpha = kNaN;
    row.e_bound = kNaN;
    if (traj.max_eta > 0.0 && traj.max_eta < stepsize_cap) {
        TheoryReport report = theory_report(inst, traj.max_eta, p_star);
        row.alpha = report.qg_modulus;
        row.e_bound = report.error_radius;
    }
    row.violations = traj.total_monitor_violations + traj.negativity_clamps;
    return row;
}

ExperimentResult finish_outputs(const MarketInstance& inst, const EquilibriumResult& eq,
                                const ExperimentConfig& config, const std::vector<NamedRun>& runs,
                                const std::vector<Trajectory>& trajs, bool with_theory,
                                bool with_compare) {
    fs::create_directories(config.output_dir);
    ExperimentResult result;
    result.p_star = eq.p_star;

    for (std::size_t k = 0; k < runs.size(); ++k) {
        fs::path traj_path = config.output_dir / (runs[k].id + ".csv");
        {
            auto out = open_artifact(traj_path);
            write_trajectory_csv(trajs[k], out);
            close_artifact(out, traj_path);
        }
        result.artifacts.push_back(traj_path);
        if (runs[k].record_prices) {
            fs::path prices_path = config.output_dir / (runs[k].id + "_prices.csv");
            auto out = open_artifact(prices_path);
            write_prices_csv(trajs[k], out);
            close_artifact(out, prices_path);
            result.artifacts.push_back(prices_path);
        }
    }

    if (with_compare) {
        fs::path cmp_path = config.output_dir / "compare.csv";
        auto out = open_artifact(cmp_path);
        out << "variant,t,err_sq\n";
        for (std::size_t k = 0; k < runs.size(); ++k)
            for (const auto& pt : trajs[k].points)
                out << runs[k].id << ',' << pt.t << ',' << format_real(pt.err_sq) << '\n';
        close_artifact(out, cmp_path);
        result.artifacts.push_back(cmp_path);
    }

    const std::vector<double> floor = instance_floor(inst);
    const double cap =
        *std::min_element(floor.begin(), floor.end()) / (2.0 * static_cast<double>(inst.items()));

    std::vector<std::size_t> order(runs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return runs[a].id < runs[b].id; });
    for (std::size_t idx : order)
        result.summary.push_back(
            make_row(runs[idx], trajs[idx], inst, eq.p_star, config.plateau_window, cap));

    {
        fs::path sum_path = config.output_dir / "summary.csv";
        auto out = open_artifact(sum_path);
        write_summary_csv(result.summary, out);
        close_artifact(out, sum_path);
        result.artifacts.push_back(sum_path);
    }

    if (with_theory) {
        // Report at the largest compliant stepsize any run used; if none is
        // compliant the file still shows the bounds at half the cap.
        double eta_report = 0.0;
        for (const auto& traj : trajs)
            if (traj.max_eta > 0.0 && traj.max_eta < cap) eta_report = std::max(eta_report, traj.max_eta);
        if (!(eta_report > 0.0)) eta_report = 0.5 * cap;
        TheoryReport report = theory_report(inst, eta_report, eq.p_star);
        if (config.epsilon)
            report.recommended_eta = recommend_stepsize(inst, *config.epsilon, eq.p_star);
        fs::path theory_path = config.output_dir / "theory.txt";
        auto out = open_artifact(theory_path);
        out << theory_report_to_text(report);
        close_artifact(out, theory_path);
        result.artifacts.push_back(theory_path);
    }

    {
        fs::path oracle_path = config.output_dir / "oracle.txt";
        auto out = open_artifact(oracle_path);
        out << equilibrium_to_text(eq);
        close_artifact(out, oracle_path);
        result.artifacts.push_back(oracle_path);
    }

    if (config.emit_plots) {
        std::vector<std::pair<std::string, const Trajectory*>> series;
        for (std::size_t idx : order) series.emplace_back(runs[idx].id, &trajs[idx]);
        fs::path svg_path = config.output_dir / "err_sq.svg";
        auto out = open_artifact(svg_path);
        write_errsq_svg(series, out);
        close_artifact(out, svg_path);
        result.artifacts.push_back(svg_path);
    }
    return result;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
    ExperimentConfig config;
    std::vector<RunDraft> drafts;
    std::set<std::string> head_seen;
    std::set<std::string> run_seen;
    std::set<std::string> ids;

    std::optional<std::string> dist_name;
    long dist_line = 0;
    std::optional<long> n_buyers, n_items;
    std::optional<std::uint64_t> seed;
    std::optional<UtilityKind> utility;
    std::optional<bool> normalize_budgets;
    bool saw_compare_only_key = false;
    bool saw_compare_run_keys = false;

    std::string raw;
    long lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::string line = trim(raw);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(ctx(lineno) + "expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(ctx(lineno) + "missing key before '='");
        if (value.empty()) throw ConfigError(ctx(lineno) + "empty value for key '" + key + "'");

        if (key == "run") {
            if (!valid_run_id(value))
                throw ConfigError(ctx(lineno) + "run ids may only use [A-Za-z0-9_.-], got '" +
                                  value + "'");
            static const std::set<std::string> kReserved = {"summary", "theory", "oracle",
                                                            "compare", "err_sq"};
            if (kReserved.count(value))
                throw ConfigError(ctx(lineno) + "run id '" + value + "' collides with a fixed artifact name");
            if (!ids.insert(value).second)
                throw ConfigError(ctx(lineno) + "duplicate run id '" + value + "'");
            RunDraft draft;
            draft.named.id = value;
            draft.line = lineno;
            drafts.push_back(std::move(draft));
            run_seen.clear();
            continue;
        }

        if (!drafts.empty()) {
            if (!run_seen.insert(key).second)
                throw ConfigError(ctx(lineno) + "duplicate key '" + key + "' in run '" +
                                  drafts.back().named.id + "'");
            apply_run_key(drafts.back(), key, value, lineno);
            continue;
        }

        std::string canon = key;
        if (canon == "buyers") canon = "n";
        if (canon == "items") canon = "m";
        if (!head_seen.insert(canon).second)
            throw ConfigError(ctx(lineno) + "duplicate key '" + key + "'");

        if (key == "market") {
            config.market_path = fs::path(value);
        } else if (key == "dist") {
            dist_name = value;
            dist_line = lineno;
        } else if (key == "n" || key == "buyers") {
            long n = parse_long_value(value, lineno, key);
            if (n < 1) throw ConfigError(ctx(lineno) + "n must be at least 1");
            n_buyers = n;
        } else if (key == "m" || key == "items") {
            long m = parse_long_value(value, lineno, key);
            if (m < 1) throw ConfigError(ctx(lineno) + "m must be at least 1");
            n_items = m;
        } else if (key == "seed") {
            seed = parse_u64_value(value, lineno, key);
        } else if (key == "utility") {
            if (value == "linear")
                utility = UtilityKind::Linear;
            else if (value == "quasilinear")
                utility = UtilityKind::QuasiLinear;
            else
                throw ConfigError(ctx(lineno) + "utility must be linear or quasilinear");
        } else if (key == "normalize_budgets") {
            normalize_budgets = parse_bool_value(value, lineno, key);
        } else if (key == "oracle_tol") {
            double tol = parse_real_value(value, lineno, key);
            if (!(tol > 0.0) || !std::isfinite(tol))
                throw ConfigError(ctx(lineno) + "oracle_tol must be a positive real");
            config.oracle_tol = tol;
        } else if (key == "oracle_max_iter") {
            long iters = parse_long_value(value, lineno, key);
            if (iters < 1) throw ConfigError(ctx(lineno) + "oracle_max_iter must be at least 1");
            config.oracle_max_iter = iters;
        } else if (key == "output_dir") {
            config.output_dir = fs::path(value);
        } else if (key == "emit_plots") {
            config.emit_plots = parse_bool_value(value, lineno, key);
        } else if (key == "epsilon") {
            double eps = parse_real_value(value, lineno, key);
            if (!(eps > 0.0) || !std::isfinite(eps))
                throw ConfigError(ctx(lineno) + "epsilon must be a positive real");
            config.epsilon = eps;
        } else if (key == "plateau_window") {
            long window = parse_long_value(value, lineno, key);
            if (window < 1) throw ConfigError(ctx(lineno) + "plateau_window must be at least 1");
            config.plateau_window = window;
        } else if (key == "base_eta") {
            double eta = parse_real_value(value, lineno, key);
            if (!(eta > 0.0) || !std::isfinite(eta))
                throw ConfigError(ctx(lineno) + "base_eta must be a positive real");
            config.base_eta = eta;
            saw_compare_only_key = true;
        } else if (key == "iterations") {
            long iters = parse_long_value(value, lineno, key);
            if (iters < 1) throw ConfigError(ctx(lineno) + "iterations must be at least 1");
            config.compare_iterations = iters;
            saw_compare_run_keys = true;
        } else if (key == "record_every") {
            long every = parse_long_value(value, lineno, key);
            if (every < 1) throw ConfigError(ctx(lineno) + "record_every must be at least 1");
            config.compare_record_every = every;
            saw_compare_run_keys = true;
        } else if (key == "include_capped") {
            config.include_capped = parse_bool_value(value, lineno, key);
            saw_compare_only_key = true;
        } else if (key == "include_floored") {
            config.include_floored = parse_bool_value(value, lineno, key);
            saw_compare_only_key = true;
        } else {
            throw ConfigError(ctx(lineno) + "unknown experiment key '" + key + "'");
        }
    }
    if (in.bad()) throw IoError("read failure while parsing config");

    bool any_synth = dist_name || n_buyers || n_items || seed || utility || normalize_budgets;
    if (config.market_path && any_synth)
        throw ConfigError("market file and generator keys are mutually exclusive");
    if (!config.market_path) {
        if (!any_synth) throw ConfigError("config needs either market or dist/n/m/seed");
        if (!dist_name || !n_buyers || !n_items || !seed)
            throw ConfigError("synthetic markets need all of dist, n, m, seed");
        SyntheticSpec spec;
        try {
            spec.dist = distribution_from_name(*dist_name);
        } catch (const MarketError& e) {
            throw ConfigError(ctx(dist_line) + e.what());
        }
        spec.buyers = static_cast<std::size_t>(*n_buyers);
        spec.items = static_cast<std::size_t>(*n_items);
        spec.seed = *seed;
        spec.kind = utility.value_or(UtilityKind::Linear);
        spec.normalize_budgets = normalize_budgets.value_or(false);
        config.synthetic = spec;
    }

    if (!drafts.empty() && (saw_compare_only_key || saw_compare_run_keys))
        throw ConfigError("run sections and compare-mode keys are mutually exclusive");
    if (drafts.empty() && saw_compare_run_keys && !config.base_eta)
        throw ConfigError("top-level iterations/record_every need base_eta (compare mode)");

    std::set<std::string> artifact_names;
    for (auto& draft : drafts) {
        NamedRun named = finalize_run(draft);
        if (!artifact_names.insert(named.id + ".csv").second ||
            (named.record_prices && !artifact_names.insert(named.id + "_prices.csv").second))
            throw ConfigError("run '" + named.id + "' would overwrite another run's artifact");
        config.runs.push_back(std::move(named));
    }
    return config;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    try {
        return parse_experiment_config(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

double plateau_estimate(const Trajectory& traj, std::size_t window) {
    if (window < 1 || window > traj.points.size())
        throw std::invalid_argument("plateau_estimate: window out of range");
    double sum = 0.0;
    for (std::size_t k = traj.points.size() - window; k < traj.points.size(); ++k)
        sum += traj.points[k].err_sq;
    return sum / static_cast<double>(window);
}

double slope_fit(const Trajectory& traj, long t_start, long t_end) {
    if (t_end < t_start) throw std::invalid_argument("slope_fit: empty range");
    std::vector<double> ts, ys;
    for (const auto& pt : traj.points) {
        if (pt.t < t_start || pt.t > t_end) continue;
        if (!std::isfinite(pt.err_sq) || !(pt.err_sq > 0.0)) continue;
        ts.push_back(static_cast<double>(pt.t));
        ys.push_back(std::log(pt.err_sq));
    }
    if (ts.size() < 3)
        throw std::invalid_argument("slope_fit: needs three recorded points with positive err_sq");
    double t_mean = 0.0, y_mean = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        t_mean += ts[k];
        y_mean += ys[k];
    }
    t_mean /= static_cast<double>(ts.size());
    y_mean /= static_cast<double>(ts.size());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        num += (ts[k] - t_mean) * (ys[k] - y_mean);
        den += (ts[k] - t_mean) * (ts[k] - t_mean);
    }
    if (!(den > 0.0)) throw std::invalid_argument("slope_fit: all points share one iteration");
    return num / den;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    if (config.runs.empty()) throw ConfigError("experiment config declares no run sections");
    MarketInstance inst = resolve_instance(config);
    EquilibriumResult eq = solve_equilibrium(inst, config.oracle_tol, config.oracle_max_iter);

    std::vector<NamedRun> runs = config.runs;
    std::optional<std::vector<double>> floor;
    for (auto& named : runs)
        if (named.floor_from_instance) {
            if (!floor) floor = instance_floor(inst);
            named.config.price_floor = *floor;
        }

    std::vector<Trajectory> trajs;
    execute_runs(inst, runs, eq.p_star, trajs);
    return finish_outputs(inst, eq, config, runs, trajs, /*with_theory=*/true,
                          /*with_compare=*/false);
}

ExperimentResult compare_variants(const ExperimentConfig& config) {
    if (!config.runs.empty()) throw ConfigError("compare mode does not take run sections");
    if (!config.base_eta) throw ConfigError("compare mode needs base_eta");
    if (config.compare_iterations < 1) throw ConfigError("compare mode needs iterations >= 1");
    MarketInstance inst = resolve_instance(config);
    EquilibriumResult eq = solve_equilibrium(inst, config.oracle_tol, config.oracle_max_iter);

    // The multiplicative and entropic updates move prices by p*eta'*z, so
    // eta' = m*eta/||B||_1 matches the additive scale p ~ B/m per coordinate.
    const double eta = *config.base_eta;
    const double rescaled = static_cast<double>(inst.items()) * eta / inst.total_budget();
    const long iters = config.compare_iterations;
    const long every = config.compare_record_every >= 1 ? config.compare_record_every
                                                        : std::max<long>(1, iters / 5000);
    auto base_run = [&](const char* id, Variant variant, double step_eta) {
        NamedRun named;
        named.id = id;
        named.config.variant = variant;
        named.config.schedule = Schedule::constant(step_eta);
        named.config.iterations = iters;
        named.config.record_every = every;
        return named;
    };
    std::vector<NamedRun> runs;
    runs.push_back(base_run("additive", Variant::Additive, eta));
    runs.push_back(base_run("multiplicative", Variant::Multiplicative, rescaled));
    runs.push_back(base_run("entropic", Variant::Entropic, rescaled));
    if (config.include_capped) {
        NamedRun named = base_run("additive_capped", Variant::Additive, eta);
        named.config.cap_excess = true;
        runs.push_back(named);
    }
    if (config.include_floored) {
        NamedRun named = base_run("additive_floored", Variant::Additive, eta);
        named.config.price_floor = instance_floor(inst);
        runs.push_back(named);
    }

    std::vector<Trajectory> trajs;
    execute_runs(inst, runs, eq.p_star, trajs);
    return finish_outputs(inst, eq, config, runs, trajs, /*with_theory=*/false,
                          /*with_compare=*/true);
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
    out << "run_id,variant,eta,final_err_sq,plateau,slope,alpha,e_bound,violations\n";
    for (const auto& row : rows) {
        out << row.run_id << ',' << row.variant << ',' << format_real(row.eta) << ','
            << format_real(row.final_err_sq) << ',' << format_real(row.plateau) << ','
            << format_real(row.slope) << ',' << format_real(row.alpha) << ','
            << format_real(row.e_bound) << ',' << row.violations << '\n';
    }
}

void write_errsq_svg(const std::vector<std::pair<std::string, const Trajectory*>>& series,
                     std::ostream& out) {
    constexpr double kW = 860.0, kH = 520.0;
    constexpr double kLeft = 70.0, kRight = 210.0, kTop = 20.0, kBottom = 45.0;
    const double pw = kW - kLeft - kRight;
    const double ph = kH - kTop - kBottom;

    long max_t = 0;
    double vlo = std::numeric_limits<double>::infinity();
    double vhi = 0.0;
    for (const auto& [label, traj] : series) {
        for (const auto& pt : traj->points) {
            max_t = std::max(max_t, pt.t);
            if (std::isfinite(pt.err_sq) && pt.err_sq > 0.0) {
                vlo = std::min(vlo, pt.err_sq);
                vhi = std::max(vhi, pt.err_sq);
            }
        }
    }
    if (max_t < 1) max_t = 1;

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"860\" height=\"520\" "
           "viewBox=\"0 0 860 520\">\n";
    out << "<rect width=\"860\" height=\"520\" fill=\"white\"/>\n";
    if (!(vhi > 0.0)) {
        out << "<text x=\"430\" y=\"260\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"14\">no positive err_sq samples</text>\n</svg>\n";
        return;
    }

    int dlo = static_cast<int>(std::floor(std::log10(vlo)));
    int dhi = static_cast<int>(std::ceil(std::log10(vhi)));
    if (dhi <= dlo) dhi = dlo + 1;
    const int span = dhi - dlo;
    int tick_step = (span + 11) / 12;
    if (tick_step < 1) tick_step = 1;

    char buf[64];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.2f", x);
        return std::string(buf);
    };
    auto fx = [&](double t) { return kLeft + pw * (t / static_cast<double>(max_t)); };
    auto fy = [&](double v) {
        return kTop + ph * (static_cast<double>(dhi) - std::log10(v)) / static_cast<double>(span);
    };

    for (int d = dlo; d <= dhi; d += tick_step) {
        double y = kTop + ph * static_cast<double>(dhi - d) / static_cast<double>(span);
        out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + pw)
            << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << d
            << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        double t = static_cast<double>(max_t) * static_cast<double>(i) / 5.0;
        double x = fx(t);
        out << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(x)
            << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << static_cast<long>(std::llround(t)) << "</text>\n";
    }
    out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw)
        << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    out << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kH - 8)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t</text>\n";
    out << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" transform=\"rotate(-90 16 "
        << num(kTop + ph / 2)
        << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">err_sq</text>\n";

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % 8];
        std::string pts;
        int count = 0;
        auto flush = [&]() {
            if (count >= 2)
                out << "<polyline fill=\"none\" stroke=\"" << color
                    << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
            pts.clear();
            count = 0;
        };
        for (const auto& pt : series[s].second->points) {
            if (!std::isfinite(pt.err_sq) || !(pt.err_sq > 0.0)) {
                flush();
                continue;
            }
            if (!pts.empty()) pts += ' ';
            pts += num(fx(static_cast<double>(pt.t)));
            pts += ',';
            pts += num(fy(pt.err_sq));
            ++count;
        }
        flush();
        double ly = kTop + 14.0 + 18.0 * static_cast<double>(s);
        out << "<line x1=\"" << num(kW - kRight + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
            << num(kW - kRight + 38) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(kW - kRight + 44) << "\" y=\"" << num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(series[s].first)
            << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace fisher
