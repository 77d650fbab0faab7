#ifndef FISHER_H
#define FISHER_H

/* C boundary of the market toolkit. Handles are opaque, every fallible call
 * returns a status code, and the failure message is kept per thread behind
 * fisher_last_error(). Strings returned through char** outputs are owned by
 * the caller and released with fisher_string_free(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fisher_status {
    FISHER_OK = 0,
    FISHER_ERR_USAGE = 1,        /* null handle, bad buffer size, bad argument */
    FISHER_ERR_IO = 2,
    FISHER_ERR_PARSE = 3,
    FISHER_ERR_VALIDATION = 4,
    FISHER_ERR_CONFIG = 5,
    FISHER_ERR_NUMERIC = 6,      /* unbounded demand, stepsize out of range, degenerate state */
    FISHER_ERR_NONCONVERGED = 7,
    FISHER_ERR_INTERNAL = 8
} fisher_status;

typedef struct fisher_market fisher_market;
typedef struct fisher_equilibrium fisher_equilibrium;

/* Message for the most recent failing call on this thread. Never NULL;
 * overwritten by the next failure. */
const char* fisher_last_error(void);

/* ---- markets ---- */

/* Loads and validates a market file. */
fisher_status fisher_market_load(const char* path, fisher_market** out);
fisher_status fisher_market_save(const fisher_market* market, const char* path);

/* dist is one of uniform01, lognormal, exponential, truncated_normal,
 * uniform_integers. normalize_budgets only applies to linear markets. */
fisher_status fisher_market_generate(const char* dist, size_t buyers, size_t items,
                                     uint64_t seed, int quasilinear, int normalize_budgets,
                                     fisher_market** out);

/* Builds a linear market from a user_id,item_id,rating CSV. zero_fill != 0
 * fills missing cells with zeros, otherwise missing cells are an error. */
fisher_status fisher_market_ingest(const char* csv_path, int min_entries, int zero_fill,
                                   uint64_t seed, fisher_market** out);

/* FISHER_OK and *report = NULL when the market is well formed, otherwise
 * FISHER_ERR_VALIDATION with *report holding one violation per line. */
fisher_status fisher_market_validate(const fisher_market* market, char** report);

size_t fisher_market_buyers(const fisher_market* market);  /* 0 on NULL */
size_t fisher_market_items(const fisher_market* market);   /* 0 on NULL */
int fisher_market_quasilinear(const fisher_market* market);
fisher_status fisher_market_budgets(const fisher_market* market, double* budgets, size_t buyers);
void fisher_market_free(fisher_market* market);

/* ---- equilibrium oracle ---- */

fisher_status fisher_solve_equilibrium(const fisher_market* market, double tol, long max_iter,
                                       fisher_equilibrium** out);
/* items must match fisher_market_items. */
fisher_status fisher_equilibrium_prices(const fisher_equilibrium* eq, double* prices,
                                        size_t items);
fisher_status fisher_equilibrium_text(const fisher_equilibrium* eq, char** text);
void fisher_equilibrium_free(fisher_equilibrium* eq);

/* ---- stepsize theory ---- */

/* Key=value block with the price floor, stepsize cap, per-item price upper
 * bounds, gradient bound, quadratic-growth modulus and plateau radius at the
 * given stepsize. Solves the equilibrium internally. epsilon > 0 adds the
 * stepsize recommendation for reaching squared distance epsilon. */
fisher_status fisher_theory_text(const fisher_market* market, double eta, double epsilon,
                                 char** text);
fisher_status fisher_recommend_stepsize(const fisher_market* market, double epsilon,
                                        double* eta);

/* ---- pointwise evaluation ---- */

fisher_status fisher_phi(const fisher_market* market, const double* prices, size_t items,
                         double* value);
fisher_status fisher_excess_demand(const fisher_market* market, const double* prices,
                                   size_t items, double* excess);

/* ---- experiment drivers ---- */

/* Executes the config file and, on success, stores the newline-separated
 * list of written artifact paths in *artifacts (may be NULL if unwanted). */
fisher_status fisher_run_experiment(const char* config_path, char** artifacts);
fisher_status fisher_compare_variants(const char* config_path, char** artifacts);

void fisher_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* FISHER_H */
