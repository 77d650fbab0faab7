#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fisher/demand.hpp"

using namespace fisher;

namespace {

MarketInstance diag2() {
    return MarketInstance({0.5, 0.5}, {1.0, 0.0, 0.0, 1.0}, 2, UtilityKind::Linear);
}

// one buyer, unit budget, equal values on two items
MarketInstance cycle2() {
    return MarketInstance({1.0}, {0.5, 0.5}, 2, UtilityKind::Linear);
}

MarketInstance ql1() {
    return MarketInstance({2.0}, {0.6, 0.4}, 2, UtilityKind::QuasiLinear);
}

double spent(const Bundle& b) {
    return std::accumulate(b.spend.begin(), b.spend.end(), 0.0);
}

double linear_utility(const MarketInstance& inst, std::size_t buyer, const Bundle& b) {
    double u = 0.0;
    for (std::size_t j = 0; j < inst.items(); ++j) u += inst.value(buyer, j) * b.quantity[j];
    return u;
}

}  // namespace

TEST_CASE("mbb set picks the cheapest ratio") {
    MarketInstance inst = cycle2();
    CHECK(mbb_set(inst, 0, {0.5, 0.6}) == std::vector<std::size_t>{0});
    CHECK(mbb_set(inst, 0, {0.6, 0.5}) == std::vector<std::size_t>{1});
    CHECK(mbb_set(inst, 0, {0.5, 0.5}) == std::vector<std::size_t>{0, 1});
    // items the buyer does not value never enter the set
    CHECK(mbb_set(diag2(), 0, {0.4, 0.0001}) == std::vector<std::size_t>{0});
}

TEST_CASE("mbb relative tolerance widens the set") {
    MarketInstance inst = cycle2();
    PriceVector p = {0.5, 0.5 + 1e-9};
    CHECK(mbb_set(inst, 0, p, 0.0) == std::vector<std::size_t>{0});
    CHECK(mbb_set(inst, 0, p, 1e-6) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("zero price on a valued item is unbounded demand") {
    CHECK_THROWS_AS(mbb_set(cycle2(), 0, {0.0, 0.5}), UnboundedDemandError);
    CHECK_THROWS_AS(linear_demand(cycle2(), 0, {0.5, 0.0}), UnboundedDemandError);
    // zero price on an unvalued item is fine
    CHECK_NOTHROW(linear_demand(diag2(), 0, {0.5, 0.0}));
}

TEST_CASE("linear demand exhausts the budget on the mbb set") {
    MarketInstance inst = cycle2();
    Bundle b = linear_demand(inst, 0, {0.25, 0.3});
    CHECK(b.quantity[0] == 4.0);
    CHECK(b.quantity[1] == 0.0);
    CHECK(b.spend[0] == 1.0);
    CHECK(b.leftover == 0.0);
    CHECK(spent(b) == 1.0);
}

TEST_CASE("tie break rules split a tied set differently") {
    MarketInstance inst = cycle2();
    PriceVector p = {0.5, 0.5};

    TieBreakPolicy smallest;
    Bundle a = linear_demand(inst, 0, p, smallest);
    CHECK(a.quantity[0] == 2.0);
    CHECK(a.quantity[1] == 0.0);

    TieBreakPolicy uniform;
    uniform.rule = TieBreak::UniformSplit;
    Bundle u = linear_demand(inst, 0, p, uniform);
    CHECK(u.quantity[0] == 1.0);
    CHECK(u.quantity[1] == 1.0);

    TieBreakPolicy prop;
    prop.rule = TieBreak::ProportionalToValue;
    Bundle pr = linear_demand(inst, 0, p, prop);
    CHECK(pr.quantity[0] == 1.0);
    CHECK(pr.quantity[1] == 1.0);
}

TEST_CASE("proportional split weights spend by value") {
    MarketInstance inst({1.0}, {0.75, 0.25}, 2, UtilityKind::Linear);
    PriceVector p = {0.75, 0.25};  // both ratios are exactly 1
    TieBreakPolicy prop;
    prop.rule = TieBreak::ProportionalToValue;
    Bundle b = linear_demand(inst, 0, p, prop);
    CHECK(b.spend[0] == doctest::Approx(0.75));
    CHECK(b.spend[1] == doctest::Approx(0.25));
    CHECK(b.quantity[0] == doctest::Approx(1.0));
    CHECK(b.quantity[1] == doctest::Approx(1.0));
}

TEST_CASE("every tie rule reaches the same optimal utility") {
    MarketInstance inst({1.0}, {0.75, 0.25}, 2, UtilityKind::Linear);
    PriceVector p = {0.75, 0.25};
    double expected = 1.0;  // B / r with r = 1
    for (TieBreak rule : {TieBreak::SmallestIndex, TieBreak::UniformSplit,
                          TieBreak::ProportionalToValue}) {
        TieBreakPolicy policy;
        policy.rule = rule;
        Bundle b = linear_demand(inst, 0, p, policy);
        CHECK(linear_utility(inst, 0, b) == doctest::Approx(expected).epsilon(1e-10));
        CHECK(spent(b) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("quasilinear demand keeps money when everything is overpriced") {
    MarketInstance inst = ql1();
    Bundle b = ql_demand(inst, 0, {0.7, 0.5});  // ratios 7/6 and 5/4, both above 1
    CHECK(b.quantity[0] == 0.0);
    CHECK(b.quantity[1] == 0.0);
    CHECK(b.leftover == 2.0);
}

TEST_CASE("quasilinear demand buys like a linear buyer below ratio 1") {
    MarketInstance inst = ql1();
    Bundle b = ql_demand(inst, 0, {0.3, 0.4});  // ratios 0.5 and 1
    CHECK(b.quantity[0] == doctest::Approx(2.0 / 0.3));
    CHECK(b.quantity[1] == 0.0);
    CHECK(b.leftover == 0.0);
}

TEST_CASE("quasilinear indifference at ratio 1 follows the policy") {
    MarketInstance inst = ql1();
    PriceVector p = {0.6, 0.4};  // both ratios exactly 1

    TieBreakPolicy spend_all;  // default
    Bundle a = ql_demand(inst, 0, p, spend_all);
    CHECK(a.leftover == 0.0);
    CHECK(spent(a) == 2.0);

    TieBreakPolicy keep;
    keep.ql_indifference = QlIndifference::SpendNothing;
    Bundle k = ql_demand(inst, 0, p, keep);
    CHECK(k.leftover == 2.0);
    CHECK(spent(k) == 0.0);
}

TEST_CASE("demand dispatches on the utility kind") {
    Bundle lin = demand(diag2(), 0, {0.5, 0.5});
    CHECK(lin.leftover == 0.0);
    Bundle ql = demand(ql1(), 0, {0.7, 0.5});
    CHECK(ql.leftover == 2.0);
}

TEST_CASE("excess demand at the cycle states") {
    MarketInstance inst = cycle2();
    double eta = 0x1p-7;
    DemandProfile prof = excess_demand(inst, {0.5, 0.5 + eta});
    CHECK(prof.excess[0] == 1.0);
    CHECK(prof.excess[1] == -1.0);

    prof = excess_demand(inst, {0.25, 0.3});
    CHECK(prof.excess[0] == 3.0);
    CHECK(prof.excess[1] == -1.0);
}

TEST_CASE("excess demand is zero at the diagonal equilibrium") {
    DemandProfile prof = excess_demand(diag2(), {0.5, 0.5});
    CHECK(prof.excess[0] == 0.0);
    CHECK(prof.excess[1] == 0.0);
    REQUIRE(prof.bundles.size() == 2);
    CHECK(prof.bundles[0].quantity[0] == 1.0);
    CHECK(prof.bundles[1].quantity[1] == 1.0);
}

TEST_CASE("excess accumulates buyer contributions in index order") {
    // two buyers chasing one item: z_0 = (-1 + q_0) + q_1 in that exact order
    MarketInstance inst({0.3, 0.4}, {1.0, 0.0, 1.0, 0.0}, 2, UtilityKind::Linear);
    // item 1 is worthless to both, so only item 0 is ever demanded
    PriceVector p = {0.7, 1.0};
    DemandProfile prof = excess_demand(inst, p);
    double q0 = 0.3 / 0.7;
    double q1 = 0.4 / 0.7;
    CHECK(prof.excess[0] == (-1.0 + q0) + q1);
}

TEST_CASE("mbb decisions are scale invariant away from ties") {
    MarketInstance inst({1.0}, {0.6, 0.3, 0.1}, 3, UtilityKind::Linear);
    PriceVector p = {0.2, 0.11, 0.04};
    auto base = mbb_set(inst, 0, p);
    for (double c : {3.0, 0.125, 1e3}) {
        PriceVector scaled = p;
        for (double& x : scaled) x *= c;
        CHECK(mbb_set(inst, 0, scaled) == base);
    }
}

TEST_CASE("spend conservation holds for random prices") {
    MarketInstance inst({0.7, 1.3}, {0.2, 0.3, 0.5, 0.6, 0.1, 0.3}, 3, UtilityKind::Linear);
    PriceVector p = {0.37, 0.22, 0.41};
    for (TieBreak rule : {TieBreak::SmallestIndex, TieBreak::UniformSplit,
                          TieBreak::ProportionalToValue}) {
        TieBreakPolicy policy;
        policy.rule = rule;
        for (std::size_t i = 0; i < 2; ++i) {
            Bundle b = demand(inst, i, p, policy);
            CHECK(spent(b) + b.leftover == doctest::Approx(inst.budget(i)).epsilon(1e-12));
        }
    }
}
