#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fisher {

// Error taxonomy. Numeric errors (unbounded demand, bad stepsize, degenerate
// oracle input, non-convergence) are distinct from input errors (io, parse,
// validation) so callers can map them to different exit codes.
class MarketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class UnboundedDemandError : public MarketError {
public:
    using MarketError::MarketError;
};
class StepsizeError : public MarketError {
public:
    using MarketError::MarketError;
};
class NumericError : public MarketError {
public:
    using MarketError::MarketError;
};
class ConvergenceError : public MarketError {
public:
    using MarketError::MarketError;
};
class IoError : public MarketError {
public:
    using MarketError::MarketError;
};
class ParseError : public MarketError {
public:
    using MarketError::MarketError;
};
class ValidationError : public MarketError {
public:
    using MarketError::MarketError;
};
class ConfigError : public MarketError {
public:
    using MarketError::MarketError;
};

enum class UtilityKind { Linear, QuasiLinear };

// Item prices. Nonnegative finite entries; zero is allowed but demand is
// undefined for an item somebody values at a zero price.
using PriceVector = std::vector<double>;

// One buyer's purchase: quantities, the money spent per item, and (for
// quasilinear buyers) the budget kept as leftover money.
struct Bundle {
    std::vector<double> quantity;
    std::vector<double> spend;
    double leftover = 0.0;
};

// A Fisher market: n buyers with budgets, m divisible items in unit supply,
// dense row-major valuations. Immutable after construction; derived scalars
// (total/min budget, row maxima) are cached once so every consumer sees the
// same floating-point values.
class MarketInstance {
public:
    MarketInstance(std::vector<double> budgets, std::vector<double> valuations,
                   std::size_t items, UtilityKind kind = UtilityKind::Linear);

    std::size_t buyers() const { return budgets_.size(); }
    std::size_t items() const { return items_; }
    UtilityKind utility_kind() const { return kind_; }

    double budget(std::size_t i) const { return budgets_[i]; }
    const std::vector<double>& budgets() const { return budgets_; }
    double value(std::size_t i, std::size_t j) const { return values_[i * items_ + j]; }
    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * items_, items_};
    }
    const std::vector<double>& values() const { return values_; }

    double total_budget() const { return total_budget_; }
    double min_budget() const { return min_budget_; }
    double row_max(std::size_t i) const { return row_max_[i]; }

private:
    std::vector<double> budgets_;
    std::vector<double> values_;  // row-major n*m
    std::size_t items_;
    UtilityKind kind_;
    double total_budget_;
    double min_budget_;
    std::vector<double> row_max_;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Checks budget positivity/finiteness, valuation nonnegativity/finiteness,
// and the no-zero-row / no-zero-column requirements. Reports all violations.
ValidationReport validate_instance(const MarketInstance& inst);

// Divides each valuation row by its sum, and optionally budgets by their sum.
// Rows (or budgets) already within 1e-12 of unit sum are left untouched, which
// makes the operation idempotent down to the stored bits. Throws
// ValidationError on a zero row (or nonpositive budget total).
MarketInstance normalize_instance(const MarketInstance& inst, bool normalize_budgets = false);

// Text round-trip format:
//   fisher 1
//   <buyers> <items>
//   <budgets...>
//   <valuation row> x buyers
//   utility linear|quasilinear     (optional, default linear)
// Reals are printed with 17 significant digits so load(save(x)) == x bitwise.
MarketInstance read_instance(std::istream& in);
void write_instance(const MarketInstance& inst, std::ostream& out);
MarketInstance load_instance(const std::filesystem::path& path);
void save_instance(const MarketInstance& inst, const std::filesystem::path& path);

// Shortest-width 17-significant-digit rendering used by every serializer.
std::string format_real(double x);
double parse_real(const std::string& token);  // strict: whole token must parse

}  // namespace fisher
