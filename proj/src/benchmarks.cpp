#include "pego/benchmarks.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pego {

namespace {

const std::vector<std::string> kLevels{"elu", "relu", "tanh", "selu", "sigmoid"};

constexpr std::array<double, 4> kContinuousShift{1.5, -2.0, 0.5, 3.0};
constexpr std::array<std::int64_t, 4> kIntegerShift{3, -4, 0, 6};
constexpr std::array<double, 5> kLevelOffset{2.0, 0.0, 1.0, 3.0, 1.5};
// Brings the multimodal function to an error-rate-like range (typical
// random points score 0.5 to 1.5). The MGF criterion is not scale invariant.
constexpr double kMultimodalScale = 0.01;

double level_offset(const std::string& level) {
    for (std::size_t i = 0; i < kLevels.size(); ++i)
        if (kLevels[i] == level)
            return kLevelOffset[i];
    return 0.0;
}

double quadratic(const Configuration& c) {
    const double a = c.real("x_r") - 0.3;
    const double b = c.real("x_c") - 1.2;
    const double i = static_cast<double>(c.integer("i_a") - 5);
    const double j = static_cast<double>(c.integer("i_b") + 2);
    return a * a + b * b + i * i + j * j + (c.level("act") == "relu" ? 0.0 : 1.0) + (c.flag("flag") ? 0.0 : 1.0);
}

double multimodal(const Configuration& c) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double f = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const double u = c.real("x_" + std::to_string(k + 1)) - kContinuousShift[k];
        f += u * u + 2.0 * (1.0 - std::cos(two_pi * u));
    }
    for (std::size_t k = 0; k < 4; ++k) {
        const double d = static_cast<double>(c.integer("z_" + std::to_string(k + 1)) - kIntegerShift[k]);
        f += 0.25 * d * d + 1.5 * (1.0 - std::cos(0.5 * std::numbers::pi * d));
    }
    return kMultimodalScale * (f + level_offset(c.level("act")) + (c.flag("flag") ? 0.0 : 1.0));
}

std::uint64_t hash_encoding(const std::vector<double>& v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double x : v) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &x, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::map<std::string, Benchmark> make_registry() {
    std::map<std::string, Benchmark> reg;

    ParameterSpace quad({ParameterSpec::continuous("x_r", 0.0, 1.0), ParameterSpec::continuous("x_c", -5.0, 5.0),
                         ParameterSpec::integer("i_a", 1, 10), ParameterSpec::integer("i_b", -5, 5),
                         ParameterSpec::categorical("act", kLevels), ParameterSpec::boolean("flag")});
    Configuration quad_opt({{"x_r", 0.3}, {"x_c", 1.2}, {"i_a", std::int64_t{5}}, {"i_b", std::int64_t{-2}},
                            {"act", std::string("relu")}, {"flag", true}});
    reg["mixed_quadratic"] = {"mixed_quadratic", quad, quad_opt, 0.0, 0.0};
    reg["noisy_quadratic"] = {"noisy_quadratic", quad, quad_opt, 0.0, 0.1};

    std::vector<ParameterSpec> mm;
    Configuration mm_opt;
    for (std::size_t k = 0; k < 4; ++k) {
        mm.push_back(ParameterSpec::continuous("x_" + std::to_string(k + 1), -5.0, 5.0));
        mm_opt.set("x_" + std::to_string(k + 1), kContinuousShift[k]);
    }
    for (std::size_t k = 0; k < 4; ++k) {
        mm.push_back(ParameterSpec::integer("z_" + std::to_string(k + 1), -10, 10));
        mm_opt.set("z_" + std::to_string(k + 1), kIntegerShift[k]);
    }
    mm.push_back(ParameterSpec::categorical("act", kLevels));
    mm.push_back(ParameterSpec::boolean("flag"));
    mm_opt.set("act", std::string("relu"));
    mm_opt.set("flag", true);
    reg["mixed_multimodal"] = {"mixed_multimodal", ParameterSpace(std::move(mm)), mm_opt, 0.0, 0.0};
    return reg;
}

const std::map<std::string, Benchmark>& registry() {
    static const auto reg = make_registry();
    return reg;
}

} // namespace

const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, b] : registry())
            out.push_back(name);
        return out;
    }();
    return names;
}

const Benchmark& benchmark(const std::string& name) {
    const auto& reg = registry();
    auto it = reg.find(name);
    if (it == reg.end())
        throw std::invalid_argument("unknown benchmark '" + name + "'");
    return it->second;
}

double builtin_benchmark(const std::string& name, const Configuration& c, Seed noise_seed) {
    const Benchmark& b = benchmark(name);
    if (auto v = b.space.validate(c); !v.empty())
        throw InvalidConfiguration(std::move(v));
    if (name == "mixed_multimodal")
        return multimodal(c);
    const double base = quadratic(c);
    if (b.noise_scale == 0.0)
        return base;
    std::mt19937_64 rng(derive_seed(noise_seed, kStreamNoise, hash_encoding(b.space.encode(c))));
    std::normal_distribution<double> normal(0.0, 1.0);
    return base + b.noise_scale * normal(rng);
}

} // namespace pego
