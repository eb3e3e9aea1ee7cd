#include "pego/infill.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace pego {

namespace {

// Intermediates are carried in long double: the gap and z cancel badly in
// double when y_min is close to m and s is small, and log Phi(z) magnifies
// the error in z by |z|.
using wide = long double;

constexpr wide kInvSqrt2 = 0.707106781186547524400844362104849039L;
constexpr wide kLogSqrt2Pi = 0.918938533204672741780329736405617640L; // log(sqrt(2 pi))

// Below this z the asymptotic Mills-ratio series replaces erfc.
constexpr wide kTailSwitch = -30.0L;

void require_finite(double x, const char* what) {
    if (!std::isfinite(x))
        throw std::invalid_argument(std::string("mgf criterion: non-finite ") + what);
}

wide log_phi(wide z) {
    if (z >= kTailSwitch)
        return std::log(0.5L * std::erfc(-z * kInvSqrt2));
    // Phi(z) = phi(z)/|z| * (1 - 1/z^2 + 3/z^4 - 15/z^6 + ...)
    const wide inv2 = 1.0L / (z * z);
    wide term = 1.0L;
    wide series = 1.0L;
    for (int k = 1; k <= 12; ++k) {
        term *= -(2.0L * k - 1.0L) * inv2;
        series += term;
    }
    return -0.5L * z * z - kLogSqrt2Pi - std::log(-z) + std::log(series);
}

} // namespace

double mgf_saturation_value() noexcept { return std::exp(kMgfExponentCap); }

double log_normal_cdf(double z) noexcept { return static_cast<double>(log_phi(z)); }

MgfValue mgf_evaluate(const SurrogatePrediction& pred, const InfillContext& ctx) {
    require_finite(pred.mean, "mean");
    require_finite(pred.variance, "variance");
    require_finite(ctx.y_min, "y_min");
    require_finite(ctx.temperature, "temperature");
    if (pred.variance < 0.0)
        throw std::invalid_argument("mgf criterion: negative variance");
    if (!(ctx.temperature > 0.0))
        throw std::invalid_argument("mgf criterion: temperature must be > 0");

    const wide t = ctx.temperature;
    const wide s2 = pred.variance;
    const wide gap = static_cast<wide>(ctx.y_min) - static_cast<wide>(pred.mean);
    wide exponent = (gap - 1.0L) * t + 0.5L * s2 * t * t;
    const bool saturated = exponent > kMgfExponentCap;
    if (saturated)
        exponent = kMgfExponentCap;

    if (pred.variance == 0.0) {
        if (gap <= 0.0L)
            return {0.0, false};
        return {static_cast<double>(std::exp(exponent)), saturated};
    }

    // (y_min - m') / s with m' = m - s^2 t.
    const wide z = (gap + s2 * t) / std::sqrt(s2);
    return {static_cast<double>(std::exp(log_phi(z) + exponent)), saturated};
}

std::vector<double> sample_temperatures(std::size_t q, Seed seed) {
    if (q < 1)
        throw std::invalid_argument("sample_temperatures needs q >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(q);
    for (auto& t : out)
        t = std::exp(normal(rng));
    return out;
}

} // namespace pego
