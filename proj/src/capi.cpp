#include "fisher.h"

#include <cstring>
#include <exception>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

#include "fisher/demand.hpp"
#include "fisher/dual.hpp"
#include "fisher/equilibrium.hpp"
#include "fisher/experiment.hpp"
#include "fisher/generate.hpp"
#include "fisher/market.hpp"

struct fisher_market {
    fisher::MarketInstance inst;
};

struct fisher_equilibrium {
    fisher::EquilibriumResult result;
};

namespace {

thread_local std::string g_last_error = "no error";

fisher_status fail(fisher_status code, const std::string& what) {
    g_last_error = what;
    return code;
}

fisher_status usage(const std::string& what) { return fail(FISHER_ERR_USAGE, what); }

// Translates the active exception into a status code.
fisher_status map_active_exception() {
    try {
        throw;
    } catch (const fisher::ConvergenceError& e) {
        return fail(FISHER_ERR_NONCONVERGED, e.what());
    } catch (const fisher::UnboundedDemandError& e) {
        return fail(FISHER_ERR_NUMERIC, e.what());
    } catch (const fisher::StepsizeError& e) {
        return fail(FISHER_ERR_NUMERIC, e.what());
    } catch (const fisher::NumericError& e) {
        return fail(FISHER_ERR_NUMERIC, e.what());
    } catch (const fisher::IoError& e) {
        return fail(FISHER_ERR_IO, e.what());
    } catch (const fisher::ParseError& e) {
        return fail(FISHER_ERR_PARSE, e.what());
    } catch (const fisher::ValidationError& e) {
        return fail(FISHER_ERR_VALIDATION, e.what());
    } catch (const fisher::ConfigError& e) {
        return fail(FISHER_ERR_CONFIG, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(FISHER_ERR_USAGE, e.what());
    } catch (const std::bad_alloc&) {
        return fail(FISHER_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(FISHER_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(FISHER_ERR_INTERNAL, "unknown failure");
    }
}

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

fisher_status reject_invalid(const fisher::MarketInstance& inst) {
    fisher::ValidationReport report = fisher::validate_instance(inst);
    if (report.ok()) return FISHER_OK;
    return fail(FISHER_ERR_VALIDATION, "market rejected: " + report.violations.front());
}

fisher_status drive_experiment(const char* config_path, char** artifacts, bool compare) {
    if (!config_path) return usage("experiment driver: config_path must be non-null");
    if (artifacts) *artifacts = nullptr;
    try {
        fisher::ExperimentConfig config = fisher::load_experiment_config(config_path);
        fisher::ExperimentResult result =
            compare ? fisher::compare_variants(config) : fisher::run_experiment(config);
        if (artifacts) {
            std::string joined;
            for (const auto& path : result.artifacts) {
                joined += path.string();
                joined += '\n';
            }
            *artifacts = copy_string(joined);
        }
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

}  // namespace

extern "C" {

const char* fisher_last_error(void) { return g_last_error.c_str(); }

fisher_status fisher_market_load(const char* path, fisher_market** out) {
    if (!path || !out) return usage("fisher_market_load: path and out must be non-null");
    *out = nullptr;
    try {
        fisher::MarketInstance inst = fisher::load_instance(path);
        fisher_status vs = reject_invalid(inst);
        if (vs != FISHER_OK) return vs;
        *out = new fisher_market{std::move(inst)};
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_market_save(const fisher_market* market, const char* path) {
    if (!market || !path) return usage("fisher_market_save: market and path must be non-null");
    try {
        fisher::save_instance(market->inst, path);
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_market_generate(const char* dist, size_t buyers, size_t items,
                                     uint64_t seed, int quasilinear, int normalize_budgets,
                                     fisher_market** out) {
    if (!dist || !out) return usage("fisher_market_generate: dist and out must be non-null");
    *out = nullptr;
    if (buyers < 1 || items < 1)
        return usage("fisher_market_generate: buyers and items must be at least 1");
    try {
        fisher::SyntheticSpec spec;
        spec.dist = fisher::distribution_from_name(dist);
        spec.buyers = buyers;
        spec.items = items;
        spec.seed = seed;
        spec.kind = quasilinear ? fisher::UtilityKind::QuasiLinear : fisher::UtilityKind::Linear;
        spec.normalize_budgets = normalize_budgets != 0;
        *out = new fisher_market{fisher::generate_synthetic(spec)};
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_market_ingest(const char* csv_path, int min_entries, int zero_fill,
                                   uint64_t seed, fisher_market** out) {
    if (!csv_path || !out) return usage("fisher_market_ingest: csv_path and out must be non-null");
    *out = nullptr;
    if (min_entries < 0) return usage("fisher_market_ingest: min_entries must be nonnegative");
    try {
        fisher::FillRule rule = zero_fill ? fisher::FillRule::Zero : fisher::FillRule::Fail;
        *out = new fisher_market{fisher::ingest_ratings(csv_path, min_entries, rule, seed)};
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_market_validate(const fisher_market* market, char** report) {
    if (!market || !report) return usage("fisher_market_validate: market and report must be non-null");
    *report = nullptr;
    try {
        fisher::ValidationReport result = fisher::validate_instance(market->inst);
        if (result.ok()) return FISHER_OK;
        std::string joined;
        for (const auto& violation : result.violations) {
            joined += violation;
            joined += '\n';
        }
        *report = copy_string(joined);
        return fail(FISHER_ERR_VALIDATION, result.violations.front());
    } catch (...) {
        return map_active_exception();
    }
}

size_t fisher_market_buyers(const fisher_market* market) {
    return market ? market->inst.buyers() : 0;
}

size_t fisher_market_items(const fisher_market* market) {
    return market ? market->inst.items() : 0;
}

int fisher_market_quasilinear(const fisher_market* market) {
    return market && market->inst.utility_kind() == fisher::UtilityKind::QuasiLinear ? 1 : 0;
}

fisher_status fisher_market_budgets(const fisher_market* market, double* budgets, size_t buyers) {
    if (!market || !budgets) return usage("fisher_market_budgets: market and budgets must be non-null");
    if (buyers != market->inst.buyers())
        return usage("fisher_market_budgets: buffer size does not match buyer count");
    const auto& src = market->inst.budgets();
    std::memcpy(budgets, src.data(), src.size() * sizeof(double));
    return FISHER_OK;
}

void fisher_market_free(fisher_market* market) { delete market; }

fisher_status fisher_solve_equilibrium(const fisher_market* market, double tol, long max_iter,
                                       fisher_equilibrium** out) {
    if (!market || !out) return usage("fisher_solve_equilibrium: market and out must be non-null");
    *out = nullptr;
    if (!(tol > 0.0)) return usage("fisher_solve_equilibrium: tol must be positive");
    if (max_iter < 1) return usage("fisher_solve_equilibrium: max_iter must be at least 1");
    try {
        *out = new fisher_equilibrium{fisher::solve_equilibrium(market->inst, tol, max_iter)};
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_equilibrium_prices(const fisher_equilibrium* eq, double* prices,
                                        size_t items) {
    if (!eq || !prices) return usage("fisher_equilibrium_prices: eq and prices must be non-null");
    if (items != eq->result.p_star.size())
        return usage("fisher_equilibrium_prices: buffer size does not match item count");
    std::memcpy(prices, eq->result.p_star.data(), items * sizeof(double));
    return FISHER_OK;
}

fisher_status fisher_equilibrium_text(const fisher_equilibrium* eq, char** text) {
    if (!eq || !text) return usage("fisher_equilibrium_text: eq and text must be non-null");
    *text = nullptr;
    try {
        *text = copy_string(fisher::equilibrium_to_text(eq->result));
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

void fisher_equilibrium_free(fisher_equilibrium* eq) { delete eq; }

fisher_status fisher_theory_text(const fisher_market* market, double eta, double epsilon,
                                 char** text) {
    if (!market || !text) return usage("fisher_theory_text: market and text must be non-null");
    *text = nullptr;
    if (!(eta > 0.0)) return usage("fisher_theory_text: eta must be positive");
    try {
        fisher::EquilibriumResult eq = fisher::solve_equilibrium(market->inst);
        fisher::TheoryReport report = fisher::theory_report(market->inst, eta, eq.p_star);
        if (epsilon > 0.0)
            report.recommended_eta =
                fisher::recommend_stepsize(market->inst, epsilon, eq.p_star);
        *text = copy_string(fisher::theory_report_to_text(report));
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_recommend_stepsize(const fisher_market* market, double epsilon,
                                        double* eta) {
    if (!market || !eta) return usage("fisher_recommend_stepsize: market and eta must be non-null");
    if (!(epsilon > 0.0)) return usage("fisher_recommend_stepsize: epsilon must be positive");
    try {
        fisher::EquilibriumResult eq = fisher::solve_equilibrium(market->inst);
        *eta = fisher::recommend_stepsize(market->inst, epsilon, eq.p_star);
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_phi(const fisher_market* market, const double* prices, size_t items,
                         double* value) {
    if (!market || !prices || !value)
        return usage("fisher_phi: market, prices and value must be non-null");
    if (items != market->inst.items())
        return usage("fisher_phi: buffer size does not match item count");
    try {
        fisher::PriceVector p(prices, prices + items);
        *value = fisher::dual_value(market->inst, p);
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_excess_demand(const fisher_market* market, const double* prices,
                                   size_t items, double* excess) {
    if (!market || !prices || !excess)
        return usage("fisher_excess_demand: market, prices and excess must be non-null");
    if (items != market->inst.items())
        return usage("fisher_excess_demand: buffer size does not match item count");
    try {
        fisher::PriceVector p(prices, prices + items);
        std::vector<double> z = fisher::excess_demand(market->inst, p).excess;
        std::memcpy(excess, z.data(), items * sizeof(double));
        return FISHER_OK;
    } catch (...) {
        return map_active_exception();
    }
}

fisher_status fisher_run_experiment(const char* config_path, char** artifacts) {
    return drive_experiment(config_path, artifacts, false);
}

fisher_status fisher_compare_variants(const char* config_path, char** artifacts) {
    return drive_experiment(config_path, artifacts, true);
}

void fisher_string_free(char* text) { delete[] text; }

}  // extern "C"
