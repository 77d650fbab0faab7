#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fisher/demand.hpp"
#include "fisher/dual.hpp"
#include "fisher/market.hpp"

namespace fisher {

enum class Variant { Additive, Multiplicative, Entropic };

// Stepsize schedule. Constant eta, the horizon rule 1/sqrt(T), or the
// anytime rule c/sqrt(t+1).
struct Schedule {
    enum class Kind { Constant, InvSqrtHorizon, InvSqrtT };
    Kind kind = Kind::Constant;
    double eta = 1e-3;   // Constant
    long horizon = 1;    // InvSqrtHorizon
    double coeff = 1.0;  // InvSqrtT

    static Schedule constant(double eta);
    static Schedule inv_sqrt_horizon(long horizon);
    static Schedule inv_sqrt_t(double coeff);

    double at(long t) const;
    double max_eta() const;  // largest value the schedule ever takes
};

double stepsize_at(const Schedule& schedule, long t);

enum class InitKind { UniformBudget, FloorVector, Explicit };

struct RunConfig {
    Variant variant = Variant::Additive;
    bool cap_excess = false;                        // update with min{z, 1}
    std::optional<std::vector<double>> price_floor; // project up onto this after update
    Schedule schedule = Schedule::constant(1e-3);
    long iterations = 1000;
    TieBreakPolicy tie_break;
    InitKind init = InitKind::UniformBudget;        // p0_j = B/m
    std::vector<double> explicit_init;              // used when init == Explicit
    long record_every = 1;
};

// One price update. z is the raw excess demand at p; cap_excess and the
// optional floor are applied here. Additive updates clamp at zero and report
// how many coordinates the clamp touched through *negativity_clamps.
// Multiplicative updates throw StepsizeError when a price would turn negative.
PriceVector step(const PriceVector& prices, const std::vector<double>& excess, double eta,
                 Variant variant, bool cap_excess = false,
                 const std::optional<std::vector<double>>& price_floor = std::nullopt,
                 long* negativity_clamps = nullptr);

struct TrajectoryPoint {
    long t = 0;
    std::vector<double> prices;
    double err_sq = 0.0;    // ||p - p*||^2, NaN when no reference prices
    double phi_value = 0.0;
    double z_norm1 = 0.0;
    double min_price = 0.0;
    double max_price = 0.0;
    long monitor_violations = 0;  // bound violations observed at this step
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    long total_monitor_violations = 0;  // across every step, recorded or not
    long negativity_clamps = 0;
    bool monitored = false;  // bounds were checked (compliant eta, init >= floor)
    double max_eta = 0.0;
};

// Runs the dynamics for cfg.iterations steps. Demand is recomputed from
// scratch at every step; step 0 and the final state are always recorded, plus
// every record_every-th step in between. When the schedule's largest stepsize
// is compliant and the initial prices dominate the floor, every step is
// checked against the run bounds built from that largest stepsize.
Trajectory run(const MarketInstance& inst, const RunConfig& cfg,
               const std::vector<double>* p_star = nullptr);

// CSV with header t,err_sq,phi,z_norm1,min_price,max_price,violations.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
// Wide CSV with header t,p_0,...,p_{m-1}.
void write_prices_csv(const Trajectory& traj, std::ostream& out);

}  // namespace fisher
