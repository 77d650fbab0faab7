#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "fisher/dual.hpp"
#include "fisher/equilibrium.hpp"
#include "fisher/generate.hpp"

using namespace fisher;

namespace {

MarketInstance diag2() {
    return MarketInstance({0.5, 0.5}, {1.0, 0.0, 0.0, 1.0}, 2, UtilityKind::Linear);
}

MarketInstance cycle2() {
    return MarketInstance({1.0}, {0.5, 0.5}, 2, UtilityKind::Linear);
}

MarketInstance ql1() {
    return MarketInstance({2.0}, {0.6, 0.4}, 2, UtilityKind::QuasiLinear);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

}  // namespace

TEST_CASE("dual objective at reference points") {
    CHECK(phi(diag2(), {0.5, 0.5}) == doctest::Approx(1.6931471805599454).epsilon(1e-14));
    CHECK(phi(cycle2(), {0.5, 0.5}) == 1.0);  // log(1) vanishes exactly
    CHECK(phi_ql(ql1(), {0.5, 0.6}) == doctest::Approx(1.4646431135879092).epsilon(1e-14));
    // above ratio 1 the quasilinear log term is clamped away
    CHECK(phi_ql(ql1(), {0.7, 0.5}) == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(dual_value(ql1(), {0.7, 0.5}) == phi_ql(ql1(), {0.7, 0.5}));
    CHECK(dual_value(diag2(), {0.5, 0.5}) == phi(diag2(), {0.5, 0.5}));
}

TEST_CASE("dual objective rejects nonpositive best ratios") {
    CHECK_THROWS_AS(phi(cycle2(), {0.0, 0.5}), MarketError);
}

TEST_CASE("subgradient is the negated excess demand") {
    auto g = subgradient(cycle2(), {0.5, 0.5 + 1e-3});
    CHECK(g[0] == -1.0);
    CHECK(g[1] == 1.0);
}

TEST_CASE("price floors") {
    auto f_cycle = floor_linear(cycle2());
    CHECK(f_cycle[0] == 0.125);
    CHECK(f_cycle[1] == 0.125);

    auto f_diag = floor_linear(diag2());
    CHECK(f_diag[0] == 0.0625);
    CHECK(f_diag[1] == 0.0625);

    auto f_ql = floor_ql(ql1());
    CHECK(f_ql[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(f_ql[1] == doctest::Approx(0.13333333333333336).epsilon(1e-14));

    CHECK(instance_floor(diag2()) == floor_linear(diag2()));
    CHECK(instance_floor(ql1()) == floor_ql(ql1()));
}

TEST_CASE("run bounds at a compliant stepsize") {
    PriceBounds b = price_bounds(diag2(), 0.001);
    CHECK(b.stepsize_cap == 0.015625);
    CHECK(b.grad_bound == doctest::Approx(19.094017094017094).epsilon(1e-13));
    CHECK(b.upper[0] == doctest::Approx(1.017094017094017).epsilon(1e-13));
    CHECK(b.upper[1] == b.upper[0]);
    CHECK(b.eta == 0.001);

    PriceBounds c = price_bounds(cycle2(), 0x1p-7);
    CHECK(c.stepsize_cap == 0.03125);
    CHECK(c.grad_bound == doctest::Approx(12.666666666666666).epsilon(1e-13));
    CHECK(c.upper[0] == doctest::Approx(1.0833333333333333).epsilon(1e-13));
}

TEST_CASE("stepsize cap is enforced") {
    CHECK_THROWS_AS(price_bounds(diag2(), 0.015625), StepsizeError);  // eta == cap
    CHECK_THROWS_AS(price_bounds(diag2(), 0.5), StepsizeError);
    CHECK_THROWS_AS(price_bounds(diag2(), 0.0), StepsizeError);
    CHECK_THROWS_AS(price_bounds(diag2(), -1e-3), StepsizeError);
    CHECK_NOTHROW(price_bounds(diag2(), 0.0156));
}

TEST_CASE("theory report adds the equilibrium quantities") {
    TheoryReport rep = theory_report(diag2(), 0.001, {0.5, 0.5});
    CHECK(rep.qg_modulus == doctest::Approx(0.24166725513734907).epsilon(1e-13));
    CHECK(rep.error_radius == doctest::Approx(0.7543046917535661).epsilon(1e-12));
    CHECK_FALSE(rep.recommended_eta.has_value());

    TheoryReport cyc = theory_report(cycle2(), 0x1p-7, {0.5, 0.5});
    CHECK(cyc.qg_modulus == doctest::Approx(0.21301775147928997).epsilon(1e-13));
    CHECK(cyc.error_radius == doctest::Approx(2.942177854938271).epsilon(1e-12));

    CHECK_THROWS_AS(theory_report(diag2(), 0.001, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(theory_report(diag2(), 0.001, {0.5, 0.0}), std::invalid_argument);
}

TEST_CASE("report text is a parsable key=value block") {
    TheoryReport rep = theory_report(diag2(), 0.001, {0.5, 0.5});
    rep.recommended_eta = 1e-6;
    std::string text = theory_report_to_text(rep);
    CHECK(text.find("stepsize_cap=0.015625\n") != std::string::npos);
    CHECK(text.find("alpha=") != std::string::npos);
    CHECK(text.find("recommended_eta=") != std::string::npos);
    auto floor = parse_vector_line(text, "floor");
    REQUIRE(floor.size() == 2);
    CHECK(floor[0] == 0.0625);
}

TEST_CASE("recommended stepsize hits the frozen reference value") {
    double eta = recommend_stepsize(diag2(), 0.01, {0.5, 0.5});
    CHECK(eta == doctest::Approx(9.611687812379855e-07).epsilon(1e-13));
    // scales linearly in epsilon while the epsilon term is the binding one
    CHECK(recommend_stepsize(diag2(), 1e-4, {0.5, 0.5}) ==
          doctest::Approx(9.611687812379855e-09).epsilon(1e-13));
    // huge epsilon: the floor/(4m) term binds
    CHECK(recommend_stepsize(diag2(), 1e9, {0.5, 0.5}) == 0.0625 / 8.0);
    CHECK_THROWS_AS(recommend_stepsize(diag2(), 0.0, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("bound monitor flags each violated bound") {
    PriceBounds b = price_bounds(diag2(), 0.001);
    std::vector<double> ok_z = {0.1, -0.1};
    CHECK(bound_monitor(b, {0.5, 0.5}, ok_z).empty());
    // exactly at the lower bound is still fine
    CHECK(bound_monitor(b, {0.0585, 0.5}, ok_z).empty());

    auto low = bound_monitor(b, {0.0585 - 1e-8, 0.5}, ok_z);
    REQUIRE(low.size() == 1);
    CHECK(low[0].find("below") != std::string::npos);

    auto high = bound_monitor(b, {0.5, 1.2}, ok_z);
    REQUIRE(high.size() == 1);

    std::vector<double> huge_z = {20.0, 0.0};
    CHECK(bound_monitor(b, {0.5, 0.5}, huge_z).size() == 1);

    auto both = bound_monitor(b, {0.01, 1.2}, huge_z);
    CHECK(both.size() == 3);
}

TEST_CASE("auxiliary model touches the dual at the equilibrium") {
    MarketInstance inst = cycle2();
    std::vector<double> p_star = {0.5, 0.5};
    std::vector<double> x_star = {1.0, 1.0};  // buyer takes both items fully
    CHECK(aux_h(inst, p_star, p_star, x_star) == doctest::Approx(phi(inst, p_star)).epsilon(1e-15));

    // h stays below phi everywhere else
    CounterRng rng(42);
    for (int k = 0; k < 200; ++k) {
        PriceVector p = {0.1 + 1.9 * rng.next_u01(), 0.1 + 1.9 * rng.next_u01()};
        CHECK(aux_h(inst, p, p_star, x_star) <= phi(inst, p) + 1e-12);
    }
}

TEST_CASE("auxiliary model gradient matches finite differences") {
    std::vector<double> p_star = {0.5, 0.5};
    std::vector<double> x_star = {1.0, 1.0};
    MarketInstance inst = cycle2();
    PriceVector p = {0.4, 0.7};
    auto grad = aux_h_grad(p, p_star);
    CHECK(grad[0] == doctest::Approx(1.0 - 0.5 / 0.4).epsilon(1e-15));
    CHECK(grad[1] == doctest::Approx(1.0 - 0.5 / 0.7).epsilon(1e-15));
    double delta = 1e-6;
    for (std::size_t j = 0; j < 2; ++j) {
        PriceVector hi = p, lo = p;
        hi[j] += delta;
        lo[j] -= delta;
        double fd = (aux_h(inst, hi, p_star, x_star) - aux_h(inst, lo, p_star, x_star)) /
                    (2.0 * delta);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("quadratic growth holds between floor and upper bound") {
    // property check on small random markets, both utility kinds
    for (int kind = 0; kind < 2; ++kind) {
        for (std::uint64_t seed : {11u, 12u}) {
            SyntheticSpec spec;
            spec.dist = Distribution::Uniform01;
            spec.buyers = 4;
            spec.items = 6;
            spec.seed = seed;
            spec.kind = kind ? UtilityKind::QuasiLinear : UtilityKind::Linear;
            spec.normalize_budgets = kind == 0;
            MarketInstance inst = generate_synthetic(spec);

            EquilibriumResult eq = solve_equilibrium(inst);
            auto floor = instance_floor(inst);
            double cap = *std::min_element(floor.begin(), floor.end()) /
                         (2.0 * static_cast<double>(inst.items()));
            TheoryReport rep = theory_report(inst, cap / 4.0, eq.p_star);
            double phi_star = dual_value(inst, eq.p_star);

            CounterRng rng(1000 + seed);
            for (int k = 0; k < 50; ++k) {
                PriceVector p(inst.items());
                double dist_sq = 0.0;
                for (std::size_t j = 0; j < p.size(); ++j) {
                    p[j] = floor[j] + (rep.price_upper[j] - floor[j]) * rng.next_u01();
                    dist_sq += (p[j] - eq.p_star[j]) * (p[j] - eq.p_star[j]);
                }
                CHECK(dual_value(inst, p) - phi_star >= rep.qg_modulus * dist_sq - 1e-9);
            }
        }
    }
}

TEST_CASE("subgradient inequality holds for sampled pairs") {
    for (MarketInstance inst : {cycle2(), diag2()}) {
        auto floor = instance_floor(inst);
        CounterRng rng(7);
        for (int k = 0; k < 100; ++k) {
            PriceVector p(2), q(2);
            for (std::size_t j = 0; j < 2; ++j) {
                p[j] = floor[j] + (1.5 - floor[j]) * rng.next_u01();
                q[j] = floor[j] + (1.5 - floor[j]) * rng.next_u01();
            }
            auto g = subgradient(inst, p);
            std::vector<double> diff = {q[0] - p[0], q[1] - p[1]};
            CHECK(phi(inst, q) >= phi(inst, p) + dot(g, diff) - 1e-9);
        }
    }
}

TEST_CASE("dual is minimal at the analytic equilibrium") {
    MarketInstance inst = cycle2();
    double phi_star = phi(inst, {0.5, 0.5});
    CounterRng rng(99);
    for (int k = 0; k < 1000; ++k) {
        PriceVector p(2);
        for (std::size_t j = 0; j < 2; ++j) {
            p[j] = 0.5 + 0.4 * (2.0 * rng.next_u01() - 1.0);
            if (p[j] < 1e-12) p[j] = 1e-12;
        }
        CHECK(phi(inst, p) >= phi_star - 1e-12);
    }
}
