#include "fisher/tatonnement.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

namespace fisher {

Schedule Schedule::constant(double eta) {
    Schedule s;
    s.kind = Kind::Constant;
    s.eta = eta;
    return s;
}

Schedule Schedule::inv_sqrt_horizon(long horizon) {
    Schedule s;
    s.kind = Kind::InvSqrtHorizon;
    s.horizon = horizon;
    return s;
}

Schedule Schedule::inv_sqrt_t(double coeff) {
    Schedule s;
    s.kind = Kind::InvSqrtT;
    s.coeff = coeff;
    return s;
}

double Schedule::at(long t) const {
    switch (kind) {
        case Kind::Constant:
            return eta;
        case Kind::InvSqrtHorizon:
            return 1.0 / std::sqrt(static_cast<double>(horizon));
        case Kind::InvSqrtT:
            return coeff / std::sqrt(static_cast<double>(t + 1));
    }
    return eta;
}

double Schedule::max_eta() const {
    return kind == Kind::InvSqrtT ? coeff : at(0);
}

double stepsize_at(const Schedule& schedule, long t) { return schedule.at(t); }

namespace {

void validate_schedule(const Schedule& s) {
    switch (s.kind) {
        case Schedule::Kind::Constant:
            if (!(s.eta > 0.0) || !std::isfinite(s.eta)) {
                throw StepsizeError("constant stepsize must be positive and finite");
            }
            break;
        case Schedule::Kind::InvSqrtHorizon:
            if (s.horizon < 1) throw StepsizeError("schedule horizon must be at least 1");
            break;
        case Schedule::Kind::InvSqrtT:
            if (!(s.coeff > 0.0) || !std::isfinite(s.coeff)) {
                throw StepsizeError("schedule coefficient must be positive and finite");
            }
            break;
    }
}

}  // namespace

PriceVector step(const PriceVector& prices, const std::vector<double>& excess, double eta,
                 Variant variant, bool cap_excess,
                 const std::optional<std::vector<double>>& price_floor,
                 long* negativity_clamps) {
    if (prices.size() != excess.size()) throw std::invalid_argument("price/excess size mismatch");
    if (price_floor && price_floor->size() != prices.size()) {
        throw std::invalid_argument("price floor size mismatch");
    }
    PriceVector out(prices.size());
    for (std::size_t j = 0; j < prices.size(); ++j) {
        double z = excess[j];
        if (cap_excess && z > 1.0) z = 1.0;
        double np = prices[j];
        switch (variant) {
            case Variant::Additive:
                np = prices[j] + eta * z;
                if (np < 0.0) {
                    np = 0.0;
                    if (negativity_clamps) ++*negativity_clamps;
                }
                break;
            case Variant::Multiplicative: {
                double factor = 1.0 + eta * z;
                if (factor < 0.0) {
                    throw StepsizeError("stepsize too large for multiplicative update (item " +
                                        std::to_string(j) + ")");
                }
                np = prices[j] * factor;
                break;
            }
            case Variant::Entropic:
                np = prices[j] * std::exp(eta * z);
                break;
        }
        if (price_floor && np < (*price_floor)[j]) np = (*price_floor)[j];
        out[j] = np;
    }
    return out;
}

namespace {

// Flat view of the per-step state the hot loop touches. Everything is
// preallocated; the loop itself never allocates.
struct Engine {
    const MarketInstance& inst;
    const RunConfig& cfg;
    std::vector<std::vector<std::uint32_t>> valued;  // per buyer, ascending
    std::vector<std::uint32_t> roaming;              // buyers that need a best-ratio scan
    // A linear buyer with one valued item spends its whole budget there under
    // every tie-break rule, so those budgets pool into a per-item constant.
    std::vector<std::pair<std::uint32_t, double>> pinned;  // (item, pooled budget)
    std::vector<std::uint32_t> pinned_owner;               // representative buyer per entry
    std::vector<std::uint32_t> scratch_set;
    bool quasilinear;

    explicit Engine(const MarketInstance& instance, const RunConfig& config)
        : inst(instance), cfg(config) {
        quasilinear = inst.utility_kind() == UtilityKind::QuasiLinear;
        valued.resize(inst.buyers());
        std::vector<double> pooled(inst.items(), 0.0);
        std::vector<std::uint32_t> owner(inst.items(), 0);
        std::vector<char> has_pool(inst.items(), 0);
        for (std::size_t i = 0; i < inst.buyers(); ++i) {
            for (std::size_t j = 0; j < inst.items(); ++j) {
                if (inst.value(i, j) > 0.0) valued[i].push_back(static_cast<std::uint32_t>(j));
            }
            if (valued[i].empty()) {
                throw ValidationError("buyer " + std::to_string(i) + " values no item");
            }
            if (!quasilinear && valued[i].size() == 1) {
                const std::uint32_t j = valued[i][0];
                pooled[j] += inst.budget(i);
                if (!has_pool[j]) {
                    has_pool[j] = 1;
                    owner[j] = static_cast<std::uint32_t>(i);
                }
            } else {
                roaming.push_back(static_cast<std::uint32_t>(i));
            }
        }
        for (std::size_t j = 0; j < inst.items(); ++j) {
            if (has_pool[j]) {
                pinned.emplace_back(static_cast<std::uint32_t>(j), pooled[j]);
                pinned_owner.push_back(owner[j]);
            }
        }
        scratch_set.reserve(inst.items());
    }

    // Raw excess demand into z (entries start at -1). Arithmetic matches the
    // per-buyer demand operations term for term; pooled single-item budgets
    // contribute first, then scanning buyers in index order.
    void excess_into(const PriceVector& p, std::vector<double>& z) {
        const double* pp = p.data();
        const std::size_t m = inst.items();
        for (std::size_t j = 0; j < m; ++j) z[j] = -1.0;
        for (std::size_t k = 0; k < pinned.size(); ++k) {
            const std::uint32_t j = pinned[k].first;
            if (!(pp[j] > 0.0)) {
                throw UnboundedDemandError("buyer " + std::to_string(pinned_owner[k]) +
                                           " values zero-priced item " + std::to_string(j));
            }
            z[j] += pinned[k].second / pp[j];
        }
        const TieBreak rule = cfg.tie_break.rule;
        const double rel_tol = cfg.tie_break.mbb_rel_tol;
        for (std::uint32_t i : roaming) {
            const auto& items = valued[i];
            const double* row = inst.row(i).data();
            const double budget = inst.budget(i);
            std::uint32_t jstar = items[0];
            double best = std::numeric_limits<double>::infinity();
            for (std::uint32_t idx : items) {
                double r = pp[idx] / row[idx];
                if (r < best) {
                    best = r;
                    jstar = idx;
                }
            }
            if (!(pp[jstar] > 0.0)) {
                throw UnboundedDemandError("buyer " + std::to_string(i) +
                                           " values zero-priced item " + std::to_string(jstar));
            }
            if (quasilinear) {
                if (best > 1.0) continue;  // keeps the budget
                if (best == 1.0 &&
                    cfg.tie_break.ql_indifference == QlIndifference::SpendNothing) {
                    continue;
                }
            }
            switch (rule) {
                case TieBreak::SmallestIndex: {
                    if (rel_tol > 0.0 && items.size() > 1) {
                        // widened set: smallest index within tolerance of the minimum
                        double cutoff = (1.0 + rel_tol) * best;
                        for (std::uint32_t idx : items) {
                            if (pp[idx] / row[idx] <= cutoff) {
                                jstar = idx;
                                break;
                            }
                        }
                    }
                    z[jstar] += budget / pp[jstar];
                    break;
                }
                case TieBreak::UniformSplit: {
                    collect_set(pp, row, items, best, rel_tol);
                    double share = budget / static_cast<double>(scratch_set.size());
                    for (std::uint32_t idx : scratch_set) z[idx] += share / pp[idx];
                    break;
                }
                case TieBreak::ProportionalToValue: {
                    collect_set(pp, row, items, best, rel_tol);
                    double total = 0.0;
                    for (std::uint32_t idx : scratch_set) total += row[idx];
                    for (std::uint32_t idx : scratch_set) {
                        z[idx] += budget * row[idx] / total / pp[idx];
                    }
                    break;
                }
            }
        }
    }

    void collect_set(const double* pp, const double* row,
                     const std::vector<std::uint32_t>& items, double best, double rel_tol) {
        scratch_set.clear();
        double cutoff = (1.0 + rel_tol) * best;
        for (std::uint32_t idx : items) {
            if (pp[idx] / row[idx] <= cutoff) scratch_set.push_back(idx);
        }
    }
};

}  // namespace

Trajectory run(const MarketInstance& inst, const RunConfig& cfg,
               const std::vector<double>* p_star) {
    const std::size_t m = inst.items();
    if (cfg.iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
    if (cfg.record_every < 1) throw std::invalid_argument("record_every must be at least 1");
    validate_schedule(cfg.schedule);
    if (p_star && p_star->size() != m) throw std::invalid_argument("p_star size mismatch");
    if (cfg.price_floor && cfg.price_floor->size() != m) {
        throw std::invalid_argument("price floor size mismatch");
    }

    PriceVector p;
    std::vector<double> floor = instance_floor(inst);
    switch (cfg.init) {
        case InitKind::UniformBudget:
            p.assign(m, inst.total_budget() / static_cast<double>(m));
            break;
        case InitKind::FloorVector:
            p = floor;
            break;
        case InitKind::Explicit:
            if (cfg.explicit_init.size() != m) {
                throw std::invalid_argument("explicit initial prices size mismatch");
            }
            p = cfg.explicit_init;
            break;
    }
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("initial prices must be finite and nonnegative");
        }
    }

    double min_floor = std::numeric_limits<double>::infinity();
    for (double f : floor) {
        if (f < min_floor) min_floor = f;
    }
    const double cap = min_floor / (2.0 * static_cast<double>(m));
    const double max_eta = cfg.schedule.max_eta();
    if (cfg.init == InitKind::FloorVector && max_eta >= cap) {
        throw StepsizeError("floor-vector start needs a stepsize below " + format_real(cap));
    }

    Trajectory traj;
    traj.max_eta = max_eta;
    bool init_on_floor = true;
    for (std::size_t j = 0; j < m; ++j) {
        if (p[j] < floor[j]) {
            init_on_floor = false;
            break;
        }
    }
    traj.monitored = init_on_floor && max_eta < cap;

    // Monitor thresholds, identical to what bound_monitor checks.
    std::vector<double> mon_lower, mon_upper;
    double mon_g2 = 0.0;
    if (traj.monitored) {
        PriceBounds bounds = price_bounds(inst, max_eta);
        mon_lower.resize(m);
        mon_upper.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            mon_lower[j] = bounds.floor[j] - 2.0 * static_cast<double>(m) * max_eta - 1e-9;
            mon_upper[j] = bounds.upper[j] + 1e-9;
        }
        double g = bounds.grad_bound + 1e-9;
        mon_g2 = g * g;
    }

    Engine engine(inst, cfg);
    std::vector<double> z(m);

    const bool const_eta = cfg.schedule.kind == Schedule::Kind::Constant;
    const double eta0 = const_eta ? cfg.schedule.eta : 0.0;
    const bool has_floor = cfg.price_floor.has_value();
    const double* floor_proj = has_floor ? cfg.price_floor->data() : nullptr;
    const bool cap_excess = cfg.cap_excess;
    const long stride = cfg.record_every;
    long next_record = 0;

    const std::size_t expected =
        static_cast<std::size_t>(cfg.iterations / stride) + 2;
    traj.points.reserve(expected);

    // Fused kernel for the fully pooled shape (every buyer funds exactly one
    // item) under an additive update with constant stepsize and no projection.
    // Its arithmetic is bit-identical to the generic path; bursts stop at every
    // record step so recorded points always come from the generic code.
    const bool fused = cfg.variant == Variant::Additive && const_eta && !cap_excess &&
                       !has_floor && engine.roaming.empty() && engine.pinned.size() == m;
    std::vector<double> pooled;
    if (fused) {
        pooled.resize(m);
        for (const auto& entry : engine.pinned) pooled[entry.first] = entry.second;
    }

    for (long t = 0;; ++t) {
        if (fused && t != next_record && t != cfg.iterations) {
            const long stop = next_record < cfg.iterations ? next_record : cfg.iterations;
            double* pp = p.data();
            const double* pool = pooled.data();
            const bool mon = traj.monitored;
            const double* lo = mon ? mon_lower.data() : nullptr;
            const double* hi = mon ? mon_upper.data() : nullptr;
            long mon_total = 0, clamps = 0;
            for (long s = t; s < stop; ++s) {
                long viol = 0;
                double zsq = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    const double pj = pp[j];
                    if (!(pj > 0.0)) {
                        throw UnboundedDemandError(
                            "buyer " + std::to_string(engine.pinned_owner[j]) +
                            " values zero-priced item " + std::to_string(j));
                    }
                    const double zj = pool[j] / pj - 1.0;
                    if (mon) {
                        zsq += zj * zj;
                        if (pj < lo[j] || pj > hi[j]) ++viol;
                    }
                    double np = pj + eta0 * zj;
                    if (np < 0.0) {
                        np = 0.0;
                        ++clamps;
                    }
                    pp[j] = np;
                }
                if (mon && zsq > mon_g2) ++viol;
                mon_total += viol;
            }
            traj.total_monitor_violations += mon_total;
            traj.negativity_clamps += clamps;
            t = stop;
        }
        engine.excess_into(p, z);

        long violations = 0;
        if (traj.monitored) {
            double zsq = 0.0;
            for (std::size_t j = 0; j < m; ++j) zsq += z[j] * z[j];
            if (zsq > mon_g2) ++violations;
            for (std::size_t j = 0; j < m; ++j) {
                if (p[j] < mon_lower[j] || p[j] > mon_upper[j]) ++violations;
            }
            traj.total_monitor_violations += violations;
        }

        if (t == next_record || t == cfg.iterations) {
            TrajectoryPoint point;
            point.t = t;
            point.prices = p;
            if (p_star) {
                double err = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    double d = p[j] - (*p_star)[j];
                    err += d * d;
                }
                point.err_sq = err;
            } else {
                point.err_sq = std::numeric_limits<double>::quiet_NaN();
            }
            point.phi_value = dual_value(inst, p);
            double n1 = 0.0, mn = p[0], mx = p[0];
            for (std::size_t j = 0; j < m; ++j) {
                n1 += std::abs(z[j]);
                if (p[j] < mn) mn = p[j];
                if (p[j] > mx) mx = p[j];
            }
            point.z_norm1 = n1;
            point.min_price = mn;
            point.max_price = mx;
            point.monitor_violations = violations;
            traj.points.push_back(std::move(point));
            if (t == next_record) next_record += stride;
        }
        if (t == cfg.iterations) break;

        const double eta = const_eta ? eta0 : cfg.schedule.at(t);
        switch (cfg.variant) {
            case Variant::Additive:
                for (std::size_t j = 0; j < m; ++j) {
                    double zj = z[j];
                    if (cap_excess && zj > 1.0) zj = 1.0;
                    double np = p[j] + eta * zj;
                    if (np < 0.0) {
                        np = 0.0;
                        ++traj.negativity_clamps;
                    }
                    if (has_floor && np < floor_proj[j]) np = floor_proj[j];
                    p[j] = np;
                }
                break;
            case Variant::Multiplicative:
                for (std::size_t j = 0; j < m; ++j) {
                    double zj = z[j];
                    if (cap_excess && zj > 1.0) zj = 1.0;
                    double factor = 1.0 + eta * zj;
                    if (factor < 0.0) {
                        throw StepsizeError(
                            "stepsize too large for multiplicative update (item " +
                            std::to_string(j) + ", step " + std::to_string(t) + ")");
                    }
                    double np = p[j] * factor;
                    if (has_floor && np < floor_proj[j]) np = floor_proj[j];
                    p[j] = np;
                }
                break;
            case Variant::Entropic:
                for (std::size_t j = 0; j < m; ++j) {
                    double zj = z[j];
                    if (cap_excess && zj > 1.0) zj = 1.0;
                    double np = p[j] * std::exp(eta * zj);
                    if (has_floor && np < floor_proj[j]) np = floor_proj[j];
                    p[j] = np;
                }
                break;
        }
    }
    return traj;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
    out << "t,err_sq,phi,z_norm1,min_price,max_price,violations\n";
    for (const TrajectoryPoint& pt : traj.points) {
        out << pt.t << ',' << format_real(pt.err_sq) << ',' << format_real(pt.phi_value) << ','
            << format_real(pt.z_norm1) << ',' << format_real(pt.min_price) << ','
            << format_real(pt.max_price) << ',' << pt.monitor_violations << '\n';
    }
}

void write_prices_csv(const Trajectory& traj, std::ostream& out) {
    std::size_t m = traj.points.empty() ? 0 : traj.points.front().prices.size();
    out << 't';
    for (std::size_t j = 0; j < m; ++j) out << ",p_" << j;
    out << '\n';
    for (const TrajectoryPoint& pt : traj.points) {
        out << pt.t;
        for (double v : pt.prices) out << ',' << format_real(v);
        out << '\n';
    }
}

}  // namespace fisher
