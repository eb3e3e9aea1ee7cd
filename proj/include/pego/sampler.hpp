#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "pego/seed.hpp"
#include "pego/space.hpp"

namespace pego {

struct DesignPlan {
    std::size_t size = 1;
    Seed seed = 0;
};

/// Latin hypercube design of `plan.size` configurations.
///
/// Every dimension's relaxed encoded range is cut into `size` equal strata
/// and each stratum receives exactly one sample, placed uniformly at random
/// inside it. Discrete dimensions are stratified on their relaxation and
/// then rounded. Configurations that coincide with an earlier one are
/// re-placed within their strata up to 10 times before being accepted.
std::vector<Configuration> lhs_sample(const ParameterSpace& space, const DesignPlan& plan);

/// Encoded-space variant of lhs_sample; rows are canonical encodings.
std::vector<std::vector<double>> lhs_sample_encoded(const ParameterSpace& space, const DesignPlan& plan);

/// One configuration drawn uniformly over the relaxed encoded box.
Configuration uniform_sample(const ParameterSpace& space, std::mt19937_64& rng);

/// Index of the stratum containing encoded coordinate `x` of parameter
/// `spec` when its relaxed range is cut into `n` strata.
std::size_t stratum_of(const ParameterSpec& spec, double x, std::size_t n);

} // namespace pego
