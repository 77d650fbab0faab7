// Command line front end. Everything goes through the C API in fisher.h so
// the binary doubles as a smoke test of the shared library boundary.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fisher.h"

namespace {

// 0 on success, 1 for input problems, 2 for numeric/convergence failures.
int exit_class(fisher_status status) {
    switch (status) {
        case FISHER_OK:
            return 0;
        case FISHER_ERR_USAGE:
        case FISHER_ERR_IO:
        case FISHER_ERR_PARSE:
        case FISHER_ERR_VALIDATION:
        case FISHER_ERR_CONFIG:
            return 1;
        default:
            return 2;
    }
}

int report(fisher_status status) {
    if (status == FISHER_OK) return 0;
    std::fprintf(stderr, "error: %s\n", fisher_last_error());
    return exit_class(status);
}

struct MarketHandle {
    fisher_market* ptr = nullptr;
    ~MarketHandle() { fisher_market_free(ptr); }
};

struct StringHandle {
    char* ptr = nullptr;
    ~StringHandle() { fisher_string_free(ptr); }
};

struct EquilibriumHandle {
    fisher_equilibrium* ptr = nullptr;
    ~EquilibriumHandle() { fisher_equilibrium_free(ptr); }
};

int write_or_print(const char* text, const std::string& out_path) {
    if (out_path.empty()) {
        std::fputs(text, stdout);
        return 0;
    }
    std::FILE* f = std::fopen(out_path.c_str(), "wb");
    if (!f || std::fputs(text, f) == EOF || std::fclose(f) != 0) {
        if (f) std::fclose(f);
        std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fisher market tatonnement toolkit"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic market");
    std::string gen_dist;
    std::size_t gen_n = 0, gen_m = 0;
    std::uint64_t gen_seed = 0;
    bool gen_ql = false;
    std::string gen_out;
    gen->add_option("--dist", gen_dist,
                    "uniform01|lognormal|exponential|truncated_normal|uniform_integers")
        ->required();
    gen->add_option("--n", gen_n, "number of buyers")->required()->check(CLI::PositiveNumber);
    gen->add_option("--m", gen_m, "number of items")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "generator seed (default 0)");
    gen->add_flag("--quasilinear", gen_ql, "buyers may keep money");
    gen->add_option("-o,--output", gen_out, "market file to write")->required();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "build a market from a ratings CSV");
    std::string ing_ratings, ing_fill = "zero", ing_out;
    int ing_min_entries = 1;
    std::uint64_t ing_seed = 0;
    ingest->add_option("--ratings", ing_ratings, "CSV with header user_id,item_id,rating")
        ->required();
    ingest->add_option("--min-entries", ing_min_entries,
                       "drop users/items with fewer ratings (default 1)")
        ->check(CLI::NonNegativeNumber);
    ingest->add_option("--fill", ing_fill, "zero|fail for missing cells (default zero)")
        ->check(CLI::IsMember({"zero", "fail"}));
    ingest->add_option("--seed", ing_seed, "budget seed (default 0)");
    ingest->add_option("-o,--output", ing_out, "market file to write")->required();

    // oracle
    auto* oracle = app.add_subcommand("oracle", "solve the exact equilibrium");
    std::string orc_market, orc_out;
    double orc_tol = 1e-10;
    long orc_max_iter = 1000000;
    oracle->add_option("--market", orc_market, "market file")->required();
    oracle->add_option("--tol", orc_tol, "relative price-movement tolerance (default 1e-10)");
    oracle->add_option("--max-iter", orc_max_iter, "iteration budget (default 1000000)");
    oracle->add_option("-o,--output", orc_out, "write the report here instead of stdout");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "stepsize theory for a market");
    std::string bnd_market, bnd_out;
    double bnd_eta = 0.0, bnd_epsilon = 0.0;
    bounds->add_option("--market", bnd_market, "market file")->required();
    bounds->add_option("--eta", bnd_eta, "stepsize to analyze")->required();
    bounds->add_option("--epsilon", bnd_epsilon,
                       "also recommend a stepsize for this squared-distance target");
    bounds->add_option("-o,--output", bnd_out, "write the report here instead of stdout");

    // run / compare
    auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
    std::string run_config;
    run_cmd->add_option("--config", run_config, "experiment config file")->required();

    auto* cmp_cmd = app.add_subcommand("compare", "run the update-rule comparison for a config");
    std::string cmp_config;
    cmp_cmd->add_option("--config", cmp_config, "compare config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        MarketHandle market;
        // Budgets are normalized to unit total for linear markets so the
        // standard theory scales apply; quasilinear budgets stay raw.
        fisher_status status = fisher_market_generate(gen_dist.c_str(), gen_n, gen_m, gen_seed,
                                                      gen_ql ? 1 : 0, gen_ql ? 0 : 1, &market.ptr);
        if (status != FISHER_OK) return report(status);
        status = fisher_market_save(market.ptr, gen_out.c_str());
        if (status != FISHER_OK) return report(status);
        std::printf("wrote %s (%zu buyers, %zu items)\n", gen_out.c_str(),
                    fisher_market_buyers(market.ptr), fisher_market_items(market.ptr));
        return 0;
    }

    if (ingest->parsed()) {
        MarketHandle market;
        fisher_status status =
            fisher_market_ingest(ing_ratings.c_str(), ing_min_entries,
                                 ing_fill == "zero" ? 1 : 0, ing_seed, &market.ptr);
        if (status != FISHER_OK) return report(status);
        status = fisher_market_save(market.ptr, ing_out.c_str());
        if (status != FISHER_OK) return report(status);
        std::printf("wrote %s (%zu buyers, %zu items)\n", ing_out.c_str(),
                    fisher_market_buyers(market.ptr), fisher_market_items(market.ptr));
        return 0;
    }

    if (oracle->parsed()) {
        MarketHandle market;
        fisher_status status = fisher_market_load(orc_market.c_str(), &market.ptr);
        if (status != FISHER_OK) return report(status);
        EquilibriumHandle eq;
        status = fisher_solve_equilibrium(market.ptr, orc_tol, orc_max_iter, &eq.ptr);
        if (status != FISHER_OK) return report(status);
        StringHandle text;
        status = fisher_equilibrium_text(eq.ptr, &text.ptr);
        if (status != FISHER_OK) return report(status);
        return write_or_print(text.ptr, orc_out);
    }

    if (bounds->parsed()) {
        MarketHandle market;
        fisher_status status = fisher_market_load(bnd_market.c_str(), &market.ptr);
        if (status != FISHER_OK) return report(status);
        StringHandle text;
        status = fisher_theory_text(market.ptr, bnd_eta, bnd_epsilon, &text.ptr);
        if (status != FISHER_OK) return report(status);
        return write_or_print(text.ptr, bnd_out);
    }

    const bool comparing = cmp_cmd->parsed();
    const std::string& config = comparing ? cmp_config : run_config;
    StringHandle artifacts;
    fisher_status status = comparing
                               ? fisher_compare_variants(config.c_str(), &artifacts.ptr)
                               : fisher_run_experiment(config.c_str(), &artifacts.ptr);
    if (status != FISHER_OK) return report(status);
    if (artifacts.ptr) std::fputs(artifacts.ptr, stdout);
    return 0;
}
