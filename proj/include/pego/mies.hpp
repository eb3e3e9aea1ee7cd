#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pego/seed.hpp"
#include "pego/space.hpp"

namespace pego {

/// Initial mutation scales per parameter kind. Continuous and integer
/// scales are fractions of the encoded range; the discrete value is the
/// initial per-parameter resampling probability (1/#discrete when unset).
struct StepFractions {
    double continuous = 0.1;
    double integer = 0.1;
    std::optional<double> discrete;
};

struct MiesParams {
    std::size_t mu = 4;
    std::size_t lambda = 28;
    std::size_t budget = 1500;
    Seed seed = 0;
    StepFractions initial_step_fractions;

    void check() const;
    json to_json() const;
    static MiesParams from_json(const json& j);
};

/// Self-adapted strategy parameters; one entry per parameter of the
/// corresponding kind, in space order.
struct Strategy {
    std::vector<double> sigma;       // continuous step sizes (encoded units)
    std::vector<double> int_step;    // integer geometric step sizes (> 0)
    std::vector<double> flip_prob;   // categorical/boolean resampling probabilities
};

struct Individual {
    std::vector<double> genome; // canonical encoding
    Strategy strategy;
    double fitness = 0.0;
};

/// Type-specific mutation operators of the mixed-integer evolution strategy.
///
/// Continuous genes take a Gaussian step with log-normally self-adapted
/// sigma; integer genes take the difference of two geometric variates with a
/// self-adapted mean step; categorical and boolean genes switch to a uniform
/// other level with a self-adapted probability. Continuous and integer
/// mutants are reflected back into range.
class MixedMutation {
public:
    MixedMutation(const ParameterSpace& space, const StepFractions& fractions);

    Strategy initial_strategy() const;
    void mutate(Individual& ind, std::mt19937_64& rng) const;
    /// Mutation of the object variables only, under a fixed strategy.
    void mutate_genes(std::vector<double>& genome, const Strategy& strategy, std::mt19937_64& rng) const;

private:
    const ParameterSpace& space_;
    StepFractions fractions_;
    std::vector<std::size_t> continuous_, integer_, discrete_;
    double tau_global_c_ = 0, tau_local_c_ = 0;
    double tau_global_i_ = 0, tau_local_i_ = 0;
    double tau_d_ = 0;
    double p_min_ = 0, p_max_ = 0.5;
};

struct MiesResult {
    Configuration best;
    std::vector<double> best_genome;
    double fitness = 0.0;
    std::size_t evaluations = 0;
    std::vector<double> trace; // best-so-far after every objective call
};

using EncodedObjective = std::function<double(std::span<const double>)>;
using Objective = std::function<double(const Configuration&)>;

/// (mu, lambda)-MIES maximizing `objective` over canonical encodings of
/// `space`. The initial population is an LHS design of mu points, the last
/// replaced by `warm_start` when given. Generations of lambda offspring run
/// while they fit in the budget; the best-ever individual is returned.
/// Non-finite objective values count as -infinity.
MiesResult maximize_encoded(const ParameterSpace& space, const EncodedObjective& objective, const MiesParams& params,
                            const std::optional<std::vector<double>>& warm_start = std::nullopt);

MiesResult maximize_detailed(const ParameterSpace& space, const Objective& objective, const MiesParams& params,
                             const std::optional<Configuration>& warm_start = std::nullopt);

Configuration maximize(const ParameterSpace& space, const Objective& objective, const MiesParams& params,
                       const std::optional<Configuration>& warm_start = std::nullopt);

/// One mutation step at the initial strategy; used to nudge duplicates.
std::vector<double> perturb_once(const ParameterSpace& space, std::span<const double> genome,
                                 const StepFractions& fractions, std::mt19937_64& rng);

} // namespace pego
