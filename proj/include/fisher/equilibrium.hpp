#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fisher/market.hpp"

namespace fisher {

// Normalized optimality residuals of a candidate equilibrium.
//   clearing:    max_j |sum_i x_ij - 1|
//   mbb:         worst spend-weighted ratio gap, max over positive spends of
//                (spend_ij/B_i) * (p_j/v_ij - r_i)/r_i with r_i the buyer's
//                best ratio; money on a worthless item counts as spend_ij/B_i
//   budget:      max_i |spend_i + leftover_i - B_i| / B_i
//   ql_leftover: max_i (leftover_i/B_i) * max(0, 1 - r_i), money kept while
//                buying was strictly better
struct KktReport {
    double clearing_residual = 0.0;
    double mbb_residual = 0.0;
    double budget_residual = 0.0;
    double ql_leftover_residual = 0.0;
    double max_residual() const;
};

struct EquilibriumResult {
    PriceVector p_star;
    std::vector<double> x_star;     // row-major buyers x items
    std::vector<double> leftovers;  // per buyer, all zero for linear markets
    KktReport kkt;
    long iterations_used = 0;
};

// One proportional-response round on a bid matrix: prices are column sums,
// allocations x_ij = b_ij / p_j, and each buyer redistributes her budget in
// proportion to the utility v_ij x_ij each item gave her. Throws NumericError
// on a bid-less item.
std::vector<double> pr_step_linear(const MarketInstance& inst, const std::vector<double>& bids);

// Quasilinear variant on an n x (m+1) matrix whose last column is money kept
// at fixed price 1: utility weights gain the kept amount and the kept column
// redistributes like an item of value 1.
std::vector<double> pr_step_ql(const MarketInstance& inst, const std::vector<double>& bids);

// Iterates proportional response from b0_ij = B_i v_ij (quasilinear: uniform
// B_i/(m+1) including the money column) until the largest price movement
// drops below tol * max price. Throws ConvergenceError if max_iter rounds are
// not enough or the final residuals exceed 100 * tol.
EquilibriumResult solve_equilibrium(const MarketInstance& inst, double tol = 1e-10,
                                    long max_iter = 1000000);

KktReport kkt_report(const MarketInstance& inst, const PriceVector& prices,
                     const std::vector<double>& x, const std::vector<double>& leftovers);

// Reference minimizer of the dual objective for markets with at most two
// items: logarithmic grid of grid_points per dimension over
// [min_j floor_j / 2, 2B], then one 10x finer pass around the best cell.
PriceVector brute_force_prices(const MarketInstance& inst, int grid_points = 400);

struct ApproxCheck {
    bool ok = true;
    std::string witness;  // first violated clause, empty when ok
};

// epsilon-approximate equilibrium test: every buyer stays within budget, gets
// at least (1-eps) times the best utility achievable with a (1-eps) budget,
// and every item sells within [1-eps, 1]. Clauses allow 1e-9 float slack.
ApproxCheck approx_equilibrium_check(const MarketInstance& inst, const PriceVector& prices,
                                     const std::vector<double>& x, double epsilon);

// Text block: p_star=..., kkt_clearing=..., kkt_mbb=..., iters=...
std::string equilibrium_to_text(const EquilibriumResult& result);
// Extracts the space-separated reals following "<key>=" in such a block.
std::vector<double> parse_vector_line(const std::string& text, const std::string& key);

}  // namespace fisher
