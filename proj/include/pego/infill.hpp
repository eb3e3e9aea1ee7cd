#pragma once

#include <cstddef>
#include <vector>

#include "pego/forest.hpp"
#include "pego/seed.hpp"

namespace pego {

/// Incumbent (minimization) and temperature for one criterion instance.
struct InfillContext {
    double y_min = 0.0;
    double temperature = 1.0;
};

/// Largest exponent fed to exp(); criterion values saturate at exp(700).
inline constexpr double kMgfExponentCap = 700.0;
double mgf_saturation_value() noexcept;

struct MgfValue {
    double value = 0.0;
    bool saturated = false; // exponent exceeded kMgfExponentCap
};

/// Moment-generating-function infill criterion, to be maximized:
///
///   M(x; t) = Phi((y_min - m'(x)) / s(x)) * exp((y_min - m(x) - 1) t + s^2(x) t^2 / 2),
///   m'(x)  = m(x) - s^2(x) t,   s(x) = sqrt(s^2(x)).
///
/// With zero variance the s -> 0+ limit is used: 0 when m >= y_min, and
/// exp((y_min - m - 1) t) otherwise. Throws std::invalid_argument on
/// non-finite inputs, negative variance, or non-positive temperature.
MgfValue mgf_evaluate(const SurrogatePrediction& pred, const InfillContext& ctx);

inline double mgf_criterion(const SurrogatePrediction& pred, const InfillContext& ctx) {
    return mgf_evaluate(pred, ctx).value;
}

/// q independent Lognormal(0, 1) draws.
std::vector<double> sample_temperatures(std::size_t q, Seed seed);

/// log Phi(z), accurate far into the lower tail.
double log_normal_cdf(double z) noexcept;

} // namespace pego
