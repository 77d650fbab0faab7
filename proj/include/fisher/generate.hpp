#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fisher/market.hpp"

namespace fisher {

// Counter-based generator: draw k is a bijective mix of (seed, k), so a
// stream is fully determined by its seed and draw index. Stream order for
// instance generation: budgets first, then valuations row-major.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64();
    double next_u01();     // [0, 1), 53-bit resolution
    double next_open01();  // (0, 1], safe for log
    double next_normal();  // standard normal, consumes two draws

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

enum class Distribution {
    Uniform01,
    LogNormalStd,
    ExponentialScale1,
    TruncatedNormal,      // |N(0,1)| conditioned on [1e-3, 10]
    UniformIntegers1to100
};

// Strict two-way mapping used by the CLI and config files.
Distribution distribution_from_name(const std::string& name);
std::string distribution_name(Distribution dist);

double sample_valuation(Distribution dist, CounterRng& rng);

struct SyntheticSpec {
    Distribution dist = Distribution::Uniform01;
    std::size_t buyers = 0;
    std::size_t items = 0;
    std::uint64_t seed = 0;
    UtilityKind kind = UtilityKind::Linear;
    bool normalize_budgets = false;  // applied only to linear markets
};

// Budgets are Uniform(0,1] (zero draws rejected), valuations drawn row-major
// with all-zero rows redrawn, rows normalized to unit sum. Budgets are
// normalized to unit total only for linear markets with the flag set.
MarketInstance generate_synthetic(const SyntheticSpec& spec);

enum class FillRule { Zero, Fail };

// Builds a linear market from a ratings CSV with header user_id,item_id,rating.
// Users and items keep their first-appearance order. Users/items with fewer
// than min_entries ratings are dropped, repeatedly, until stable. Missing
// cells are zero-filled or rejected per the rule; duplicate pairs keep the
// last rating. Budgets are then drawn Uniform(0,1] from the seed and rows are
// normalized.
MarketInstance ingest_ratings(const std::filesystem::path& csv_path, int min_entries,
                              FillRule fill, std::uint64_t seed);

}  // namespace fisher
