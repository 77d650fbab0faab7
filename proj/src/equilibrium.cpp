#include "fisher/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fisher/dual.hpp"

namespace fisher {

double KktReport::max_residual() const {
    return std::max(std::max(clearing_residual, mbb_residual),
                    std::max(budget_residual, ql_leftover_residual));
}

std::vector<double> pr_step_linear(const MarketInstance& inst, const std::vector<double>& bids) {
    const std::size_t n = inst.buyers(), m = inst.items();
    if (bids.size() != n * m) throw std::invalid_argument("bid matrix size mismatch");
    std::vector<double> prices(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) prices[j] += bids[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (!(prices[j] > 0.0)) {
            throw NumericError("item " + std::to_string(j) + " received no bids");
        }
    }
    std::vector<double> next(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        double gain = 0.0;  // total utility of buyer i's allocation
        for (std::size_t j = 0; j < m; ++j) {
            double x = bids[i * m + j] / prices[j];
            gain += inst.value(i, j) * x;
        }
        if (!(gain > 0.0)) {
            throw NumericError("buyer " + std::to_string(i) + " gains nothing from her bids");
        }
        const double budget = inst.budget(i);
        for (std::size_t j = 0; j < m; ++j) {
            double x = bids[i * m + j] / prices[j];
            next[i * m + j] = budget * inst.value(i, j) * x / gain;
        }
    }
    return next;
}

std::vector<double> pr_step_ql(const MarketInstance& inst, const std::vector<double>& bids) {
    const std::size_t n = inst.buyers(), m = inst.items();
    const std::size_t cols = m + 1;  // last column: money kept at price 1
    if (bids.size() != n * cols) throw std::invalid_argument("bid matrix size mismatch");
    std::vector<double> prices(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) prices[j] += bids[i * cols + j];
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (!(prices[j] > 0.0)) {
            throw NumericError("item " + std::to_string(j) + " received no bids");
        }
    }
    std::vector<double> next(n * cols);
    for (std::size_t i = 0; i < n; ++i) {
        double kept = bids[i * cols + m];
        double gain = kept;  // kept money has value 1 per unit
        for (std::size_t j = 0; j < m; ++j) {
            double x = bids[i * cols + j] / prices[j];
            gain += inst.value(i, j) * x;
        }
        if (!(gain > 0.0)) {
            throw NumericError("buyer " + std::to_string(i) + " gains nothing from her bids");
        }
        const double budget = inst.budget(i);
        for (std::size_t j = 0; j < m; ++j) {
            double x = bids[i * cols + j] / prices[j];
            next[i * cols + j] = budget * inst.value(i, j) * x / gain;
        }
        next[i * cols + m] = budget * kept / gain;
    }
    return next;
}

namespace {

std::vector<double> initial_bids(const MarketInstance& inst) {
    const std::size_t n = inst.buyers(), m = inst.items();
    if (inst.utility_kind() == UtilityKind::QuasiLinear) {
        std::vector<double> bids(n * (m + 1));
        for (std::size_t i = 0; i < n; ++i) {
            double share = inst.budget(i) / static_cast<double>(m + 1);
            for (std::size_t c = 0; c <= m; ++c) bids[i * (m + 1) + c] = share;
        }
        return bids;
    }
    std::vector<double> bids(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) bids[i * m + j] = inst.budget(i) * inst.value(i, j);
    }
    return bids;
}

std::vector<double> column_prices(const std::vector<double>& bids, std::size_t n, std::size_t m,
                                  std::size_t cols) {
    std::vector<double> prices(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) prices[j] += bids[i * cols + j];
    }
    return prices;
}

}  // namespace

KktReport kkt_report(const MarketInstance& inst, const PriceVector& prices,
                     const std::vector<double>& x, const std::vector<double>& leftovers) {
    const std::size_t n = inst.buyers(), m = inst.items();
    if (prices.size() != m || x.size() != n * m || leftovers.size() != n) {
        throw std::invalid_argument("kkt_report argument size mismatch");
    }
    KktReport kkt;
    const bool quasilinear = inst.utility_kind() == UtilityKind::QuasiLinear;

    for (std::size_t j = 0; j < m; ++j) {
        double sold = 0.0;
        for (std::size_t i = 0; i < n; ++i) sold += x[i * m + j];
        double res = std::abs(sold - 1.0);
        if (res > kkt.clearing_residual) kkt.clearing_residual = res;
    }

    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double v = inst.value(i, j);
            if (v <= 0.0) continue;
            if (!(prices[j] > 0.0)) {
                throw NumericError("zero price on valued item " + std::to_string(j));
            }
            double r = prices[j] / v;
            if (r < best) best = r;
        }
        const double budget = inst.budget(i);
        double spent = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double s = prices[j] * x[i * m + j];
            spent += s;
            if (s <= 0.0) continue;
            double gap;
            if (inst.value(i, j) > 0.0) {
                gap = (prices[j] / inst.value(i, j) - best) / best;
            } else {
                gap = 1.0;  // money on a worthless item is a plain violation
            }
            double res = (s / budget) * gap;
            if (res > kkt.mbb_residual) kkt.mbb_residual = res;
        }
        double budget_res = std::abs(spent + leftovers[i] - budget) / budget;
        if (budget_res > kkt.budget_residual) kkt.budget_residual = budget_res;
        if (quasilinear && leftovers[i] > 0.0 && best < 1.0) {
            double res = (leftovers[i] / budget) * (1.0 - best);
            if (res > kkt.ql_leftover_residual) kkt.ql_leftover_residual = res;
        }
    }
    return kkt;
}

EquilibriumResult solve_equilibrium(const MarketInstance& inst, double tol, long max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
    const std::size_t n = inst.buyers(), m = inst.items();
    const bool quasilinear = inst.utility_kind() == UtilityKind::QuasiLinear;
    const std::size_t cols = quasilinear ? m + 1 : m;

    std::vector<double> bids = initial_bids(inst);
    std::vector<double> prices = column_prices(bids, n, m, cols);
    long used = 0;
    // Price movement alone can stall an order of magnitude before the optimality
    // residuals do, so after each movement-based stop the residuals are checked
    // and, if still too large, the movement criterion is tightened and the
    // iteration resumes.  Every pass through the loop reuses the same bid state,
    // so the overall run stays deterministic.
    double movement_tol = tol;
    while (true) {
        bool settled = false;
        while (used < max_iter) {
            bids = quasilinear ? pr_step_ql(inst, bids) : pr_step_linear(inst, bids);
            ++used;
            std::vector<double> next_prices = column_prices(bids, n, m, cols);
            double move = 0.0, scale = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                move = std::max(move, std::abs(next_prices[j] - prices[j]));
                scale = std::max(scale, prices[j]);
            }
            prices = std::move(next_prices);
            if (move < movement_tol * scale) {
                settled = true;
                break;
            }
        }
        if (!settled) {
            throw ConvergenceError("equilibrium iteration did not converge in " +
                                   std::to_string(max_iter) + " rounds");
        }

        EquilibriumResult result;
        result.p_star = prices;
        result.iterations_used = used;
        result.x_star.resize(n * m);
        result.leftovers.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                result.x_star[i * m + j] = bids[i * cols + j] / prices[j];
            }
            if (quasilinear) result.leftovers[i] = bids[i * cols + m];
        }
        result.kkt = kkt_report(inst, result.p_star, result.x_star, result.leftovers);
        if (result.kkt.max_residual() <= 100.0 * tol) return result;
        if (used >= max_iter) {
            throw ConvergenceError("equilibrium residuals too large: " +
                                   format_real(result.kkt.max_residual()));
        }
        movement_tol *= 0.1;
    }
}

PriceVector brute_force_prices(const MarketInstance& inst, int grid_points) {
    const std::size_t m = inst.items();
    if (m > 2) throw std::invalid_argument("brute force supports at most two items");
    if (grid_points < 2) throw std::invalid_argument("need at least two grid points");

    std::vector<double> floor = instance_floor(inst);
    double lo = *std::min_element(floor.begin(), floor.end()) / 2.0;
    double hi = 2.0 * inst.total_budget();
    if (!(lo > 0.0) || hi <= lo) throw NumericError("degenerate brute-force price range");

    auto log_grid = [](double a, double b, int count) {
        std::vector<double> g(count);
        double la = std::log(a), lb = std::log(b);
        for (int k = 0; k < count; ++k) {
            g[k] = std::exp(la + (lb - la) * static_cast<double>(k) /
                                     static_cast<double>(count - 1));
        }
        return g;
    };

    const bool quasilinear = inst.utility_kind() == UtilityKind::QuasiLinear;
    auto objective = [&](const PriceVector& p) {
        return quasilinear ? phi_ql(inst, p) : phi(inst, p);
    };

    auto scan = [&](const std::vector<double>& ga, const std::vector<double>& gb) {
        // gb is empty for single-item markets
        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> arg{0, 0};
        PriceVector p(m);
        for (int a = 0; a < static_cast<int>(ga.size()); ++a) {
            p[0] = ga[a];
            if (m == 1) {
                double v = objective(p);
                if (v < best) {
                    best = v;
                    arg = {a, 0};
                }
                continue;
            }
            for (int b = 0; b < static_cast<int>(gb.size()); ++b) {
                p[1] = gb[b];
                double v = objective(p);
                if (v < best) {
                    best = v;
                    arg = {a, b};
                }
            }
        }
        return arg;
    };

    std::vector<double> grid = log_grid(lo, hi, grid_points);
    std::vector<double> gb = m == 2 ? grid : std::vector<double>{};
    auto [a, b] = scan(grid, gb);

    // one refinement: 10x finer spacing across the winning cell's neighbors
    auto refine = [&](int k) {
        int klo = std::max(k - 1, 0), khi = std::min(k + 1, grid_points - 1);
        return log_grid(grid[klo], grid[khi], 21);
    };
    std::vector<double> ra = refine(a);
    std::vector<double> rb = m == 2 ? refine(b) : std::vector<double>{};
    auto [fa, fb] = scan(ra, rb);

    PriceVector out(m);
    out[0] = ra[fa];
    if (m == 2) out[1] = rb[fb];
    return out;
}

ApproxCheck approx_equilibrium_check(const MarketInstance& inst, const PriceVector& prices,
                                     const std::vector<double>& x, double epsilon) {
    const std::size_t n = inst.buyers(), m = inst.items();
    if (prices.size() != m || x.size() != n * m) {
        throw std::invalid_argument("approx check argument size mismatch");
    }
    if (epsilon < 0.0 || epsilon >= 1.0) throw std::invalid_argument("epsilon must be in [0,1)");
    constexpr double kSlack = 1e-9;
    const bool quasilinear = inst.utility_kind() == UtilityKind::QuasiLinear;
    ApproxCheck check;

    for (std::size_t i = 0; i < n; ++i) {
        double spent = 0.0, utility = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            spent += prices[j] * x[i * m + j];
            utility += inst.value(i, j) * x[i * m + j];
        }
        const double budget = inst.budget(i);
        if (spent > budget + kSlack) {
            check.ok = false;
            check.witness = "buyer " + std::to_string(i) + " overspends: " + format_real(spent) +
                            " > budget " + format_real(budget);
            return check;
        }
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double v = inst.value(i, j);
            if (v <= 0.0) continue;
            if (!(prices[j] > 0.0)) {
                check.ok = false;
                check.witness = "zero price on item " + std::to_string(j) +
                                " valued by buyer " + std::to_string(i);
                return check;
            }
            double r = prices[j] / v;
            if (r < best) best = r;
        }
        // best utility reachable with a (1-eps) budget, in closed form
        if (quasilinear) {
            double q_utility = utility - spent;
            double per_dollar = 1.0 / best - 1.0;
            double target = per_dollar > 0.0 ? (1.0 - epsilon) * budget * per_dollar : 0.0;
            if (q_utility < (1.0 - epsilon) * target - kSlack) {
                check.ok = false;
                check.witness = "buyer " + std::to_string(i) + " far from optimal: " +
                                format_real(q_utility) + " < " +
                                format_real((1.0 - epsilon) * target);
                return check;
            }
        } else {
            double target = (1.0 - epsilon) * budget / best;
            if (utility < (1.0 - epsilon) * target - kSlack) {
                check.ok = false;
                check.witness = "buyer " + std::to_string(i) + " far from optimal: " +
                                format_real(utility) + " < " +
                                format_real((1.0 - epsilon) * target);
                return check;
            }
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        double sold = 0.0;
        for (std::size_t i = 0; i < n; ++i) sold += x[i * m + j];
        if (sold < 1.0 - epsilon - kSlack || sold > 1.0 + kSlack) {
            check.ok = false;
            check.witness = "item " + std::to_string(j) + " clears at " + format_real(sold) +
                            ", outside [" + format_real(1.0 - epsilon) + ", 1]";
            return check;
        }
    }
    return check;
}

std::string equilibrium_to_text(const EquilibriumResult& result) {
    std::ostringstream out;
    out << "p_star=";
    for (std::size_t j = 0; j < result.p_star.size(); ++j) {
        out << (j ? " " : "") << format_real(result.p_star[j]);
    }
    out << '\n';
    out << "kkt_clearing=" << format_real(result.kkt.clearing_residual) << '\n';
    out << "kkt_mbb=" << format_real(result.kkt.mbb_residual) << '\n';
    out << "iters=" << result.iterations_used << '\n';
    return out.str();
}

std::vector<double> parse_vector_line(const std::string& text, const std::string& key) {
    std::istringstream lines(text);
    std::string line;
    const std::string prefix = key + "=";
    while (std::getline(lines, line)) {
        if (line.rfind(prefix, 0) != 0) continue;
        std::istringstream fields(line.substr(prefix.size()));
        std::vector<double> values;
        std::string tok;
        while (fields >> tok) values.push_back(parse_real(tok));
        if (values.empty()) throw ParseError("empty vector for key '" + key + "'");
        return values;
    }
    throw ParseError("key '" + key + "' not found");
}

}  // namespace fisher
