#include "pego/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pego {

namespace {

constexpr int kDuplicateRedraws = 10;

double place_in_stratum(const ParameterSpec& p, std::size_t stratum, std::size_t n, double u) {
    const double lo = p.relaxed_low();
    const double width = (p.relaxed_high() - lo) / static_cast<double>(n);
    double x = lo + (static_cast<double>(stratum) + u) * width;
    // Keep the point inside its own stratum under rounding.
    return std::min(x, std::nextafter(lo + static_cast<double>(stratum + 1) * width, lo));
}

} // namespace

std::size_t stratum_of(const ParameterSpec& spec, double x, std::size_t n) {
    const double lo = spec.relaxed_low();
    const double hi = spec.relaxed_high();
    const double pos = (x - lo) / (hi - lo) * static_cast<double>(n);
    const auto idx = static_cast<std::ptrdiff_t>(std::floor(pos));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

std::vector<std::vector<double>> lhs_sample_encoded(const ParameterSpace& space, const DesignPlan& plan) {
    if (plan.size < 1)
        throw std::invalid_argument("design size must be >= 1");
    const std::size_t n = plan.size;
    const std::size_t d = space.size();
    std::mt19937_64 rng(derive_seed(plan.seed, kStreamDesign));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // strata[j][i]: stratum of sample i along dimension j.
    std::vector<std::vector<std::size_t>> strata(d, std::vector<std::size_t>(n));
    for (auto& column : strata) {
        std::iota(column.begin(), column.end(), std::size_t{0});
        std::shuffle(column.begin(), column.end(), rng);
    }

    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    std::set<std::vector<double>> seen;
    std::vector<double> raw(d);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row;
        for (int attempt = 0; attempt <= kDuplicateRedraws; ++attempt) {
            for (std::size_t j = 0; j < d; ++j)
                raw[j] = place_in_stratum(space[j], strata[j][i], n, unit(rng));
            row = space.canonicalize(raw);
            // Continuous coordinates keep their in-stratum value after
            // canonicalization; only discrete ones are rounded.
            if (!seen.count(row))
                break;
        }
        seen.insert(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Configuration> lhs_sample(const ParameterSpace& space, const DesignPlan& plan) {
    std::vector<Configuration> out;
    for (const auto& row : lhs_sample_encoded(space, plan))
        out.push_back(space.decode(row));
    return out;
}

Configuration uniform_sample(const ParameterSpace& space, std::mt19937_64& rng) {
    std::vector<double> raw(space.size());
    for (std::size_t j = 0; j < space.size(); ++j) {
        std::uniform_real_distribution<double> dist(space[j].relaxed_low(), space[j].relaxed_high());
        raw[j] = dist(rng);
    }
    return space.decode(space.canonicalize(raw));
}

} // namespace pego
