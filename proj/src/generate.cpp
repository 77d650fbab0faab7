#include "fisher/generate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace fisher {

std::uint64_t CounterRng::next_u64() {
    // splitmix64: golden-ratio counter stream through a bijective finalizer
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double CounterRng::next_u01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::next_open01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::next_normal() {
    // Box-Muller, cosine branch only so each normal costs exactly two draws
    double u1 = next_open01();
    double u2 = next_u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Distribution distribution_from_name(const std::string& name) {
    if (name == "uniform01") return Distribution::Uniform01;
    if (name == "lognormal") return Distribution::LogNormalStd;
    if (name == "exponential") return Distribution::ExponentialScale1;
    if (name == "truncated_normal") return Distribution::TruncatedNormal;
    if (name == "uniform_integers") return Distribution::UniformIntegers1to100;
    throw ConfigError("unknown distribution '" + name +
                      "' (uniform01, lognormal, exponential, truncated_normal, "
                      "uniform_integers)");
}

std::string distribution_name(Distribution dist) {
    switch (dist) {
        case Distribution::Uniform01:
            return "uniform01";
        case Distribution::LogNormalStd:
            return "lognormal";
        case Distribution::ExponentialScale1:
            return "exponential";
        case Distribution::TruncatedNormal:
            return "truncated_normal";
        case Distribution::UniformIntegers1to100:
            return "uniform_integers";
    }
    return "?";
}

double sample_valuation(Distribution dist, CounterRng& rng) {
    switch (dist) {
        case Distribution::Uniform01:
            return rng.next_u01();
        case Distribution::LogNormalStd:
            return std::exp(rng.next_normal());
        case Distribution::ExponentialScale1:
            return -std::log(rng.next_open01());
        case Distribution::TruncatedNormal: {
            // |N(0,1)| conditioned on [1e-3, 10]; acceptance is near 1
            for (;;) {
                double a = std::abs(rng.next_normal());
                if (a >= 1e-3 && a <= 10.0) return a;
            }
        }
        case Distribution::UniformIntegers1to100:
            return 1.0 + std::floor(rng.next_u01() * 100.0);
    }
    return 0.0;
}

MarketInstance generate_synthetic(const SyntheticSpec& spec) {
    if (spec.buyers == 0 || spec.items == 0) {
        throw std::invalid_argument("need at least one buyer and one item");
    }
    CounterRng rng(spec.seed);
    std::vector<double> budgets(spec.buyers);
    for (double& b : budgets) {
        do {
            b = rng.next_u01();
        } while (b == 0.0);
    }
    std::vector<double> values(spec.buyers * spec.items);
    for (std::size_t i = 0; i < spec.buyers; ++i) {
        for (;;) {
            double sum = 0.0;
            for (std::size_t j = 0; j < spec.items; ++j) {
                double v = sample_valuation(spec.dist, rng);
                values[i * spec.items + j] = v;
                sum += v;
            }
            if (sum > 0.0) break;  // all-zero rows are redrawn
        }
    }
    MarketInstance raw(std::move(budgets), std::move(values), spec.items, spec.kind);
    bool norm_b = spec.normalize_budgets && spec.kind == UtilityKind::Linear;
    return normalize_instance(raw, norm_b);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct Rating {
    std::size_t user;
    std::size_t item;
    double value;
};

}  // namespace

MarketInstance ingest_ratings(const std::filesystem::path& csv_path, int min_entries,
                              FillRule fill, std::uint64_t seed) {
    if (min_entries < 1) throw std::invalid_argument("min_entries must be at least 1");
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open ratings file: " + csv_path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty ratings file");
    {
        std::istringstream header(line);
        std::string c1, c2, c3;
        std::getline(header, c1, ',');
        std::getline(header, c2, ',');
        std::getline(header, c3, ',');
        if (trim(c1) != "user_id" || trim(c2) != "item_id" || trim(c3) != "rating") {
            throw ParseError("ratings header must be user_id,item_id,rating");
        }
    }

    // ids keep first-appearance order; duplicate pairs keep the last rating
    std::vector<std::string> user_ids, item_ids;
    std::map<std::string, std::size_t> user_index, item_index;
    std::map<std::pair<std::size_t, std::size_t>, double> cells;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        std::istringstream fields(t);
        std::string fu, fi, fr;
        if (!std::getline(fields, fu, ',') || !std::getline(fields, fi, ',') ||
            !std::getline(fields, fr, ',')) {
            throw ParseError("line " + std::to_string(line_no) + ": expected three fields");
        }
        std::string extra;
        if (std::getline(fields, extra, ',')) {
            throw ParseError("line " + std::to_string(line_no) + ": too many fields");
        }
        fu = trim(fu);
        fi = trim(fi);
        double rating = parse_real(trim(fr));
        if (!std::isfinite(rating) || rating < 0.0) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": rating must be finite and nonnegative");
        }
        auto [uit, unew] = user_index.try_emplace(fu, user_ids.size());
        if (unew) user_ids.push_back(fu);
        auto [iit, inew] = item_index.try_emplace(fi, item_ids.size());
        if (inew) item_ids.push_back(fi);
        cells[{uit->second, iit->second}] = rating;
    }
    if (cells.empty()) throw ParseError("ratings file has no data rows");

    // drop thin users/items until stable
    std::vector<bool> user_alive(user_ids.size(), true), item_alive(item_ids.size(), true);
    for (;;) {
        std::vector<int> user_count(user_ids.size(), 0), item_count(item_ids.size(), 0);
        for (const auto& [key, value] : cells) {
            if (user_alive[key.first] && item_alive[key.second]) {
                ++user_count[key.first];
                ++item_count[key.second];
            }
        }
        bool changed = false;
        for (std::size_t u = 0; u < user_ids.size(); ++u) {
            if (user_alive[u] && user_count[u] < min_entries) {
                user_alive[u] = false;
                changed = true;
            }
        }
        for (std::size_t i = 0; i < item_ids.size(); ++i) {
            if (item_alive[i] && item_count[i] < min_entries) {
                item_alive[i] = false;
                changed = true;
            }
        }
        if (!changed) break;
    }

    std::vector<std::size_t> users, items;
    for (std::size_t u = 0; u < user_ids.size(); ++u) {
        if (user_alive[u]) users.push_back(u);
    }
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
        if (item_alive[i]) items.push_back(i);
    }
    if (users.empty() || items.empty()) {
        throw ParseError("no users or items survive min_entries=" + std::to_string(min_entries));
    }

    const std::size_t n = users.size(), m = items.size();
    std::vector<double> values(n * m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            auto it = cells.find({users[r], items[c]});
            if (it != cells.end()) {
                values[r * m + c] = it->second;
            } else if (fill == FillRule::Fail) {
                throw ParseError("missing rating for user '" + user_ids[users[r]] +
                                 "', item '" + item_ids[items[c]] + "'");
            }
        }
    }

    // zero-filling may leave degenerate rows or columns; reject them
    for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < m; ++c) sum += values[r * m + c];
        if (!(sum > 0.0)) {
            throw ParseError("user '" + user_ids[users[r]] + "' has only zero ratings");
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += values[r * m + c];
        if (!(sum > 0.0)) {
            throw ParseError("item '" + item_ids[items[c]] + "' has only zero ratings");
        }
    }

    CounterRng rng(seed);
    std::vector<double> budgets(n);
    for (double& b : budgets) {
        do {
            b = rng.next_u01();
        } while (b == 0.0);
    }
    MarketInstance raw(std::move(budgets), std::move(values), m, UtilityKind::Linear);
    return normalize_instance(raw, false);
}

}  // namespace fisher
