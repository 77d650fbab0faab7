#pragma once

#include <cstddef>
#include <vector>

#include "fisher/market.hpp"

namespace fisher {

// How a buyer splits her budget when several items are tied for the best
// price-to-value ratio.
enum class TieBreak { SmallestIndex, UniformSplit, ProportionalToValue };

// What a quasilinear buyer does when the best ratio is exactly 1 (utility of
// buying equals utility of keeping the money).
enum class QlIndifference { SpendAll, SpendNothing };

struct TieBreakPolicy {
    TieBreak rule = TieBreak::SmallestIndex;
    QlIndifference ql_indifference = QlIndifference::SpendAll;
    double mbb_rel_tol = 0.0;  // 0 means exact ratio ties only
};

// Items attaining the buyer's minimum price/value ratio, ascending, within a
// relative tolerance: { j : v_ij > 0, p_j/v_ij <= (1+rel_tol) * min ratio }.
// Throws UnboundedDemandError when the buyer values a zero-priced item.
std::vector<std::size_t> mbb_set(const MarketInstance& inst, std::size_t buyer,
                                 const PriceVector& prices, double rel_tol = 0.0);

// Budget-exhausting demand of a linear buyer, split over the MBB set by the
// policy rule. spend sums to the budget; quantity[j] = spend[j]/p[j].
Bundle linear_demand(const MarketInstance& inst, std::size_t buyer,
                     const PriceVector& prices, const TieBreakPolicy& policy = {});

// Quasilinear demand. With r = min price/value ratio: r < 1 buys like a
// linear buyer, r > 1 keeps the whole budget as leftover, r == 1 follows the
// indifference rule.
Bundle ql_demand(const MarketInstance& inst, std::size_t buyer,
                 const PriceVector& prices, const TieBreakPolicy& policy = {});

// Dispatch on the instance's utility kind.
Bundle demand(const MarketInstance& inst, std::size_t buyer,
              const PriceVector& prices, const TieBreakPolicy& policy = {});

struct DemandProfile {
    std::vector<Bundle> bundles;  // one per buyer
    std::vector<double> excess;   // z_j = sum_i x_ij - 1
};

DemandProfile excess_demand(const MarketInstance& inst, const PriceVector& prices,
                            const TieBreakPolicy& policy = {});

}  // namespace fisher
