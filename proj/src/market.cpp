#include "fisher/market.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fisher {

namespace {

// Rows (budget vectors) whose sum is already this close to 1 are considered
// normalized and left untouched, which is what makes normalization idempotent.
constexpr double kUnitSumTol = 1e-12;

}  // namespace

MarketInstance::MarketInstance(std::vector<double> budgets, std::vector<double> valuations,
                               std::size_t items, UtilityKind kind)
    : budgets_(std::move(budgets)), values_(std::move(valuations)), items_(items), kind_(kind) {
    if (budgets_.empty() || items_ == 0) {
        throw ValidationError("market needs at least one buyer and one item");
    }
    if (values_.size() != budgets_.size() * items_) {
        throw ValidationError("valuation matrix size does not match buyers x items");
    }
    total_budget_ = 0.0;
    min_budget_ = std::numeric_limits<double>::infinity();
    for (double b : budgets_) {
        total_budget_ += b;
        if (b < min_budget_) min_budget_ = b;
    }
    row_max_.resize(budgets_.size());
    for (std::size_t i = 0; i < budgets_.size(); ++i) {
        double mx = 0.0;
        for (std::size_t j = 0; j < items_; ++j) {
            double v = values_[i * items_ + j];
            if (v > mx) mx = v;
        }
        row_max_[i] = mx;
    }
}

ValidationReport validate_instance(const MarketInstance& inst) {
    ValidationReport report;
    auto flag = [&report](const std::string& msg) { report.violations.push_back(msg); };

    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        double b = inst.budget(i);
        if (!std::isfinite(b)) {
            flag("budget of buyer " + std::to_string(i) + " is not finite");
        } else if (b <= 0.0) {
            flag("budget of buyer " + std::to_string(i) + " is not positive");
        }
    }
    std::vector<bool> column_seen(inst.items(), false);
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        bool row_seen = false;
        for (std::size_t j = 0; j < inst.items(); ++j) {
            double v = inst.value(i, j);
            if (!std::isfinite(v)) {
                flag("valuation (" + std::to_string(i) + "," + std::to_string(j) +
                     ") is not finite");
            } else if (v < 0.0) {
                flag("valuation (" + std::to_string(i) + "," + std::to_string(j) +
                     ") is negative");
            } else if (v > 0.0) {
                row_seen = true;
                column_seen[j] = true;
            }
        }
        if (!row_seen) flag("buyer " + std::to_string(i) + " values no item (zero row)");
    }
    for (std::size_t j = 0; j < inst.items(); ++j) {
        if (!column_seen[j]) flag("item " + std::to_string(j) + " is valued by nobody (zero column)");
    }
    return report;
}

MarketInstance normalize_instance(const MarketInstance& inst, bool normalize_budgets) {
    std::vector<double> values(inst.values());
    const std::size_t m = inst.items();
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) sum += values[i * m + j];
        if (!(sum > 0.0)) {
            throw ValidationError("cannot normalize zero valuation row of buyer " +
                                  std::to_string(i));
        }
        if (std::abs(sum - 1.0) <= kUnitSumTol) continue;
        for (std::size_t j = 0; j < m; ++j) values[i * m + j] /= sum;
    }
    std::vector<double> budgets(inst.budgets());
    if (normalize_budgets) {
        double total = 0.0;
        for (double b : budgets) total += b;
        if (!(total > 0.0)) throw ValidationError("cannot normalize nonpositive total budget");
        if (std::abs(total - 1.0) > kUnitSumTol) {
            for (double& b : budgets) b /= total;
        }
    }
    return MarketInstance(std::move(budgets), std::move(values), m, inst.utility_kind());
}

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double parse_real(const std::string& token) {
    const char* begin = token.c_str();
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw ParseError("not a real number: '" + token + "'");
    }
    return value;
}

namespace {

std::string next_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw ParseError(std::string("unexpected end of input, expected ") + what);
    return tok;
}

std::size_t parse_count(const std::string& tok, const char* what) {
    char* end = nullptr;
    long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || v <= 0) {
        throw ParseError(std::string("expected positive ") + what + ", got '" + tok + "'");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

MarketInstance read_instance(std::istream& in) {
    if (next_token(in, "magic") != "fisher") throw ParseError("missing 'fisher' magic");
    if (next_token(in, "format version") != "1") throw ParseError("unsupported format version");
    std::size_t n = parse_count(next_token(in, "buyer count"), "buyer count");
    std::size_t m = parse_count(next_token(in, "item count"), "item count");

    std::vector<double> budgets(n);
    for (std::size_t i = 0; i < n; ++i) budgets[i] = parse_real(next_token(in, "budget"));
    std::vector<double> values(n * m);
    for (std::size_t k = 0; k < n * m; ++k) values[k] = parse_real(next_token(in, "valuation"));

    UtilityKind kind = UtilityKind::Linear;
    std::string tok;
    if (in >> tok) {
        if (tok != "utility") throw ParseError("unexpected trailing token '" + tok + "'");
        std::string which = next_token(in, "utility kind");
        if (which == "linear") {
            kind = UtilityKind::Linear;
        } else if (which == "quasilinear") {
            kind = UtilityKind::QuasiLinear;
        } else {
            throw ParseError("unknown utility kind '" + which + "'");
        }
        if (in >> tok) throw ParseError("unexpected trailing token '" + tok + "'");
    }
    return MarketInstance(std::move(budgets), std::move(values), m, kind);
}

void write_instance(const MarketInstance& inst, std::ostream& out) {
    out << "fisher 1\n" << inst.buyers() << ' ' << inst.items() << '\n';
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        out << (i ? " " : "") << format_real(inst.budget(i));
    }
    out << '\n';
    for (std::size_t i = 0; i < inst.buyers(); ++i) {
        for (std::size_t j = 0; j < inst.items(); ++j) {
            out << (j ? " " : "") << format_real(inst.value(i, j));
        }
        out << '\n';
    }
    if (inst.utility_kind() == UtilityKind::QuasiLinear) out << "utility quasilinear\n";
}

MarketInstance load_instance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open market file: " + path.string());
    return read_instance(in);
}

void save_instance(const MarketInstance& inst, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write market file: " + path.string());
    write_instance(inst, out);
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace fisher
