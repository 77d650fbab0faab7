#include "fisher/demand.hpp"

#include <limits>
#include <string>

namespace fisher {

namespace {

// Smallest price/value ratio of a buyer, guarding against zero prices on
// valued items (demand would be unbounded there).
double min_ratio(const MarketInstance& inst, std::size_t buyer, const PriceVector& prices) {
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < inst.items(); ++j) {
        double v = inst.value(buyer, j);
        if (v <= 0.0) continue;
        any = true;
        if (!(prices[j] > 0.0)) {
            throw UnboundedDemandError("buyer " + std::to_string(buyer) +
                                       " values zero-priced item " + std::to_string(j));
        }
        double r = prices[j] / v;
        if (r < best) best = r;
    }
    if (!any) {
        throw UnboundedDemandError("buyer " + std::to_string(buyer) + " values no item");
    }
    return best;
}

}  // namespace

std::vector<std::size_t> mbb_set(const MarketInstance& inst, std::size_t buyer,
                                 const PriceVector& prices, double rel_tol) {
    if (prices.size() != inst.items()) throw std::invalid_argument("price vector size mismatch");
    double best = min_ratio(inst, buyer, prices);
    double cutoff = (1.0 + rel_tol) * best;
    std::vector<std::size_t> set;
    for (std::size_t j = 0; j < inst.items(); ++j) {
        double v = inst.value(buyer, j);
        if (v > 0.0 && prices[j] / v <= cutoff) set.push_back(j);
    }
    return set;
}

namespace {

Bundle spend_on_mbb(const MarketInstance& inst, std::size_t buyer, const PriceVector& prices,
                    const TieBreakPolicy& policy) {
    Bundle bundle;
    bundle.quantity.assign(inst.items(), 0.0);
    bundle.spend.assign(inst.items(), 0.0);
    const double budget = inst.budget(buyer);
    std::vector<std::size_t> set = mbb_set(inst, buyer, prices, policy.mbb_rel_tol);

    switch (policy.rule) {
        case TieBreak::SmallestIndex: {
            std::size_t j = set.front();  // mbb_set is ascending
            bundle.spend[j] = budget;
            bundle.quantity[j] = budget / prices[j];
            break;
        }
        case TieBreak::UniformSplit: {
            double share = budget / static_cast<double>(set.size());
            for (std::size_t j : set) {
                bundle.spend[j] = share;
                bundle.quantity[j] = share / prices[j];
            }
            break;
        }
        case TieBreak::ProportionalToValue: {
            double total = 0.0;
            for (std::size_t j : set) total += inst.value(buyer, j);
            for (std::size_t j : set) {
                double s = budget * inst.value(buyer, j) / total;
                bundle.spend[j] = s;
                bundle.quantity[j] = s / prices[j];
            }
            break;
        }
    }
    return bundle;
}

Bundle empty_bundle(const MarketInstance& inst, double leftover) {
    Bundle bundle;
    bundle.quantity.assign(inst.items(), 0.0);
    bundle.spend.assign(inst.items(), 0.0);
    bundle.leftover = leftover;
    return bundle;
}

}  // namespace

Bundle linear_demand(const MarketInstance& inst, std::size_t buyer, const PriceVector& prices,
                     const TieBreakPolicy& policy) {
    return spend_on_mbb(inst, buyer, prices, policy);
}

Bundle ql_demand(const MarketInstance& inst, std::size_t buyer, const PriceVector& prices,
                 const TieBreakPolicy& policy) {
    double r = min_ratio(inst, buyer, prices);
    if (r > 1.0 || (r == 1.0 && policy.ql_indifference == QlIndifference::SpendNothing)) {
        return empty_bundle(inst, inst.budget(buyer));
    }
    return spend_on_mbb(inst, buyer, prices, policy);
}

Bundle demand(const MarketInstance& inst, std::size_t buyer, const PriceVector& prices,
              const TieBreakPolicy& policy) {
    return inst.utility_kind() == UtilityKind::QuasiLinear
               ? ql_demand(inst, buyer, prices, policy)
               : linear_demand(inst, buyer, prices, policy);
}

DemandProfile excess_demand(const MarketInstance& inst, const PriceVector& prices,
                            const TieBreakPolicy& policy) {
    DemandProfile profile;
    profile.bundles.reserve(inst.buyers());
    profile.excess.assign(inst.items(), -1.0);
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        Bundle b = demand(inst, i, prices, policy);
        for (std::size_t j = 0; j < inst.items(); ++j) profile.excess[j] += b.quantity[j];
        profile.bundles.push_back(std::move(b));
    }
    return profile;
}

}  // namespace fisher
