#include "fisher/dual.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace fisher {

namespace {

constexpr double kMonitorSlack = 1e-9;

double min_ratio_checked(const MarketInstance& inst, std::size_t buyer,
                         const PriceVector& prices) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < inst.items(); ++j) {
        double v = inst.value(buyer, j);
        if (v <= 0.0) continue;
        double r = prices[j] / v;
        if (r < best) best = r;
    }
    if (!(best > 0.0) || !std::isfinite(best)) {
        throw NumericError("buyer " + std::to_string(buyer) +
                           " has nonpositive minimum price/value ratio");
    }
    return best;
}

}  // namespace

double phi(const MarketInstance& inst, const PriceVector& prices) {
    if (prices.size() != inst.items()) throw std::invalid_argument("price vector size mismatch");
    double value = 0.0;
    for (double p : prices) value += p;
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        value -= inst.budget(i) * std::log(min_ratio_checked(inst, i, prices));
    }
    return value;
}

double phi_ql(const MarketInstance& inst, const PriceVector& prices) {
    if (prices.size() != inst.items()) throw std::invalid_argument("price vector size mismatch");
    double value = 0.0;
    for (double p : prices) value += p;
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        double r = min_ratio_checked(inst, i, prices);
        if (r > 1.0) r = 1.0;  // keeping money is always available at ratio 1
        value -= inst.budget(i) * std::log(r);
    }
    return value;
}

double dual_value(const MarketInstance& inst, const PriceVector& prices) {
    return inst.utility_kind() == UtilityKind::QuasiLinear ? phi_ql(inst, prices)
                                                           : phi(inst, prices);
}

std::vector<double> subgradient(const MarketInstance& inst, const PriceVector& prices,
                                const TieBreakPolicy& policy) {
    std::vector<double> g = excess_demand(inst, prices, policy).excess;
    for (double& v : g) v = -v;
    return g;
}

namespace {

// max_i v_ij / ||v_i||_inf per item; shared by both floors.
std::vector<double> column_shape(const MarketInstance& inst) {
    std::vector<double> shape(inst.items(), 0.0);
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        double mx = inst.row_max(i);
        if (!(mx > 0.0)) {
            throw ValidationError("buyer " + std::to_string(i) + " values no item (zero row)");
        }
        for (std::size_t j = 0; j < inst.items(); ++j) {
            double r = inst.value(i, j) / mx;
            if (r > shape[j]) shape[j] = r;
        }
    }
    return shape;
}

}  // namespace

std::vector<double> floor_linear(const MarketInstance& inst) {
    std::vector<double> shape = column_shape(inst);
    double prefactor = inst.min_budget() / (4.0 * static_cast<double>(inst.items()));
    for (double& s : shape) s *= prefactor;
    return shape;
}

std::vector<double> floor_ql(const MarketInstance& inst) {
    std::vector<double> shape = column_shape(inst);
    // v_min: over items, the value that the buyer attaining the column shape
    // (smallest index on ties) places on that item.
    double v_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < inst.items(); ++j) {
        double best = -1.0;
        std::size_t owner = 0;
        for (std::size_t i = 0; i < inst.buyers(); ++i) {
            double r = inst.value(i, j) / inst.row_max(i);
            if (r > best) {
                best = r;
                owner = i;
            }
        }
        double v = inst.value(owner, j);
        if (v < v_min) v_min = v;
    }
    double prefactor = inst.min_budget() / (4.0 * static_cast<double>(inst.items()));
    if (v_min / 2.0 < prefactor) prefactor = v_min / 2.0;
    for (double& s : shape) s *= prefactor;
    return shape;
}

std::vector<double> instance_floor(const MarketInstance& inst) {
    return inst.utility_kind() == UtilityKind::QuasiLinear ? floor_ql(inst) : floor_linear(inst);
}

PriceBounds price_bounds(const MarketInstance& inst, double eta) {
    PriceBounds bounds;
    bounds.floor = instance_floor(inst);
    double min_floor = std::numeric_limits<double>::infinity();
    for (double f : bounds.floor) {
        if (f < min_floor) min_floor = f;
    }
    const double m = static_cast<double>(inst.items());
    bounds.stepsize_cap = min_floor / (2.0 * m);
    if (!(eta > 0.0)) throw StepsizeError("stepsize must be positive");
    if (eta >= bounds.stepsize_cap) {
        throw StepsizeError("stepsize " + format_real(eta) + " not below cap " +
                            format_real(bounds.stepsize_cap));
    }
    bounds.eta = eta;
    const double B = inst.total_budget();
    bounds.grad_bound = B / (min_floor - 2.0 * m * eta) + m;
    bounds.upper.resize(inst.items());
    if (inst.utility_kind() == UtilityKind::QuasiLinear) {
        for (std::size_t j = 0; j < inst.items(); ++j) {
            double col_max = 0.0;
            for (std::size_t i = 0; i < inst.buyers(); ++i) {
                double v = inst.value(i, j);
                if (v > col_max) col_max = v;
            }
            double base = col_max < B ? col_max : B;
            bounds.upper[j] = base + eta * B / (bounds.floor[j] - 2.0 * m * eta);
        }
    } else {
        for (std::size_t j = 0; j < inst.items(); ++j) {
            bounds.upper[j] = (1.0 + eta / (bounds.floor[j] - 2.0 * m * eta)) * B;
        }
    }
    return bounds;
}

TheoryReport theory_report(const MarketInstance& inst, double eta,
                           const std::vector<double>& p_star) {
    if (p_star.size() != inst.items()) throw std::invalid_argument("p_star size mismatch");
    PriceBounds bounds = price_bounds(inst, eta);
    TheoryReport report;
    report.floor = std::move(bounds.floor);
    report.stepsize_cap = bounds.stepsize_cap;
    report.price_upper = std::move(bounds.upper);
    report.grad_bound = bounds.grad_bound;
    report.eta = eta;
    double alpha = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < inst.items(); ++j) {
        if (!(p_star[j] > 0.0)) throw std::invalid_argument("p_star must be positive");
        double a = p_star[j] / (2.0 * report.price_upper[j] * report.price_upper[j]);
        if (a < alpha) alpha = a;
    }
    report.qg_modulus = alpha;
    report.error_radius = eta * report.grad_bound * report.grad_bound / (2.0 * alpha);
    return report;
}

double recommend_stepsize(const MarketInstance& inst, double epsilon,
                          const std::vector<double>& p_star_lower) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (p_star_lower.size() != inst.items()) throw std::invalid_argument("p_star size mismatch");
    std::vector<double> floor = instance_floor(inst);
    double min_floor = std::numeric_limits<double>::infinity();
    for (double f : floor) {
        if (f < min_floor) min_floor = f;
    }
    double min_star = std::numeric_limits<double>::infinity();
    for (double p : p_star_lower) {
        if (!(p > 0.0)) throw std::invalid_argument("p_star lower bound must be positive");
        if (p < min_star) min_star = p;
    }
    const double m = static_cast<double>(inst.items());
    const double B = inst.total_budget();
    double first = min_floor / (4.0 * m);
    double denom = 2.0 * B / min_floor + m;
    double second = 2.0 * epsilon * min_star / (9.0 * B * B * denom * denom);
    return first < second ? first : second;
}

std::vector<std::string> bound_monitor(const PriceBounds& bounds, const PriceVector& prices,
                                       const std::vector<double>& excess) {
    std::vector<std::string> violations;
    const double m = static_cast<double>(bounds.floor.size());
    for (std::size_t j = 0; j < prices.size(); ++j) {
        double lower = bounds.floor[j] - 2.0 * m * bounds.eta - kMonitorSlack;
        if (prices[j] < lower) {
            violations.push_back("price of item " + std::to_string(j) + " = " +
                                 format_real(prices[j]) + " below floor bound " +
                                 format_real(lower));
        }
        double upper = bounds.upper[j] + kMonitorSlack;
        if (prices[j] > upper) {
            violations.push_back("price of item " + std::to_string(j) + " = " +
                                 format_real(prices[j]) + " above ceiling " + format_real(upper));
        }
    }
    double zsq = 0.0;
    for (double z : excess) zsq += z * z;
    double cap = bounds.grad_bound + kMonitorSlack;
    if (zsq > cap * cap) {
        violations.push_back("excess demand norm " + format_real(std::sqrt(zsq)) +
                             " exceeds bound " + format_real(bounds.grad_bound));
    }
    return violations;
}

std::vector<std::string> bound_monitor(const TheoryReport& report, const PriceVector& prices,
                                       const std::vector<double>& excess) {
    PriceBounds bounds;
    bounds.floor = report.floor;
    bounds.stepsize_cap = report.stepsize_cap;
    bounds.upper = report.price_upper;
    bounds.grad_bound = report.grad_bound;
    bounds.eta = report.eta;
    return bound_monitor(bounds, prices, excess);
}

double aux_h(const MarketInstance& inst, const PriceVector& prices,
             const std::vector<double>& p_star, const std::vector<double>& x_star) {
    if (prices.size() != inst.items() || p_star.size() != inst.items() ||
        x_star.size() != inst.buyers() * inst.items()) {
        throw std::invalid_argument("aux_h argument size mismatch");
    }
    double value = 0.0;
    for (double p : prices) {
        if (!(p > 0.0)) throw NumericError("aux_h needs positive prices");
        value += p;
    }
    for (std::size_t j = 0; j < inst.items(); ++j) {
        for (std::size_t i = 0; i < inst.buyers(); ++i) {
            double x = x_star[i * inst.items() + j];
            if (x <= 0.0) continue;  // zero allocation contributes nothing
            value -= p_star[j] * x * std::log(prices[j] / inst.value(i, j));
        }
    }
    return value;
}

std::vector<double> aux_h_grad(const PriceVector& prices, const std::vector<double>& p_star) {
    if (prices.size() != p_star.size()) throw std::invalid_argument("size mismatch");
    std::vector<double> grad(prices.size());
    for (std::size_t j = 0; j < prices.size(); ++j) {
        if (!(prices[j] > 0.0)) throw NumericError("aux_h_grad needs positive prices");
        grad[j] = 1.0 - p_star[j] / prices[j];
    }
    return grad;
}

namespace {

void append_vector(std::ostringstream& out, const char* key, const std::vector<double>& v) {
    out << key << '=';
    for (std::size_t j = 0; j < v.size(); ++j) out << (j ? " " : "") << format_real(v[j]);
    out << '\n';
}

}  // namespace

std::string theory_report_to_text(const TheoryReport& report) {
    std::ostringstream out;
    append_vector(out, "floor", report.floor);
    out << "stepsize_cap=" << format_real(report.stepsize_cap) << '\n';
    append_vector(out, "price_upper", report.price_upper);
    out << "grad_bound=" << format_real(report.grad_bound) << '\n';
    out << "alpha=" << format_real(report.qg_modulus) << '\n';
    out << "e=" << format_real(report.error_radius) << '\n';
    out << "eta=" << format_real(report.eta) << '\n';
    if (report.recommended_eta) {
        out << "recommended_eta=" << format_real(*report.recommended_eta) << '\n';
    }
    return out.str();
}

}  // namespace fisher
