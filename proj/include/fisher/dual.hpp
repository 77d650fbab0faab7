#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fisher/demand.hpp"
#include "fisher/market.hpp"

namespace fisher {

// Dual objective of the market: sum of prices minus budget-weighted log of
// each buyer's best price/value ratio. Tatonnement is subgradient descent on
// it. Throws NumericError if some buyer's minimum ratio is not positive.
double phi(const MarketInstance& inst, const PriceVector& prices);

// Quasilinear variant: the ratio is clamped at 1 (keeping money is always an
// option worth exactly 1 per unit).
double phi_ql(const MarketInstance& inst, const PriceVector& prices);

// Convenience dispatch on utility kind.
double dual_value(const MarketInstance& inst, const PriceVector& prices);

// A subgradient of the dual at p: elementwise 1 - sum_i x_ij, i.e. the
// negated excess demand under the given selection policy.
std::vector<double> subgradient(const MarketInstance& inst, const PriceVector& prices,
                                const TieBreakPolicy& policy = {});

// Price floors that compliant runs never cross. Linear markets use
//   floor_j = B_min/(4m) * max_i v_ij / ||v_i||_inf,
// quasilinear ones shrink the prefactor to min{B_min/(4m), v_min/2} where
// v_min is the value the row-dominant buyer of each item places on it.
std::vector<double> floor_linear(const MarketInstance& inst);
std::vector<double> floor_ql(const MarketInstance& inst);
std::vector<double> instance_floor(const MarketInstance& inst);  // dispatch

// Worst-case run bounds for a constant stepsize eta:
//   floor - 2m*eta  lower-bounds every price,
//   grad_bound      upper-bounds ||z||_2,
//   upper           upper-bounds every price.
// Valid for eta < stepsize_cap = min_j floor_j / (2m); constructors throw
// StepsizeError otherwise.
struct PriceBounds {
    std::vector<double> floor;
    double stepsize_cap = 0.0;
    std::vector<double> upper;
    double grad_bound = 0.0;
    double eta = 0.0;
};

PriceBounds price_bounds(const MarketInstance& inst, double eta);

// PriceBounds plus the quantities that need the equilibrium prices: the
// quadratic-growth modulus alpha = min_j p*_j / (2 upper_j^2) and the error
// radius e = eta * G^2 / (2 alpha) that the squared distance plateaus at.
struct TheoryReport {
    std::vector<double> floor;
    double stepsize_cap = 0.0;
    std::vector<double> price_upper;
    double grad_bound = 0.0;
    double qg_modulus = 0.0;
    double error_radius = 0.0;
    std::optional<double> recommended_eta;
    double eta = 0.0;
};

TheoryReport theory_report(const MarketInstance& inst, double eta,
                           const std::vector<double>& p_star);

// Stepsize that brings the squared distance below epsilon:
//   min{ min_j floor_j/(4m),
//        2 epsilon min_j p*_j / (9 B^2 (2B/min_j floor_j + m)^2) }.
// p_star_lower may be any elementwise lower bound on the equilibrium prices.
double recommend_stepsize(const MarketInstance& inst, double epsilon,
                          const std::vector<double>& p_star_lower);

// Checks a state against the three run bounds with additive slack 1e-9 and
// returns one message per violated bound (empty means compliant).
std::vector<std::string> bound_monitor(const PriceBounds& bounds, const PriceVector& prices,
                                       const std::vector<double>& excess);
std::vector<std::string> bound_monitor(const TheoryReport& report, const PriceVector& prices,
                                       const std::vector<double>& excess);

// Smooth lower model of the dual through the equilibrium pair (p*, x*):
//   h(p) = sum_j p_j - sum_{i,j} p*_j x*_ij log(p_j / v_ij),
// with gradient 1 - p*_j/p_j. Touches phi at p* and stays below it.
double aux_h(const MarketInstance& inst, const PriceVector& prices,
             const std::vector<double>& p_star, const std::vector<double>& x_star);
std::vector<double> aux_h_grad(const PriceVector& prices, const std::vector<double>& p_star);

// Flat key=value text block (vectors space-separated, 17 significant digits).
std::string theory_report_to_text(const TheoryReport& report);

}  // namespace fisher
