#pragma once

#include <string>
#include <vector>

#include "pego/seed.hpp"
#include "pego/space.hpp"

namespace pego {

/// Synthetic stand-ins for expensive evaluations. Values are minimized.
///
///   mixed_quadratic   x_r in [0,1], x_c in [-5,5], i_a in [1..10],
///                     i_b in [-5..5], act in {elu,relu,tanh,selu,sigmoid},
///                     flag boolean.
///                     (x_r-0.3)^2 + (x_c-1.2)^2 + (i_a-5)^2 + (i_b+2)^2
///                     + [act != relu] + [!flag]; optimum 0.
///   mixed_multimodal  10 dims: x_1..x_4 in [-5,5], z_1..z_4 in [-10..10],
///                     act (5 levels), flag. Rastrigin-style ripples on a
///                     quadratic bowl per coordinate plus level offsets,
///                     scaled by 1/100 to an error-rate-like range;
///                     optimum 0.
///   noisy_quadratic   mixed_quadratic + 0.1 * N(0,1), the noise drawn from
///                     a generator keyed by (noise seed, configuration).
struct Benchmark {
    std::string name;
    ParameterSpace space;
    Configuration optimum;
    double optimum_value = 0.0;
    double noise_scale = 0.0;
};

const std::vector<std::string>& benchmark_names();
/// Throws std::invalid_argument for an unknown name.
const Benchmark& benchmark(const std::string& name);

/// Deterministic value of benchmark `name` at `c`; `noise_seed` only
/// matters for stochastic benchmarks. Throws InvalidConfiguration when `c`
/// is not valid in the benchmark's space.
double builtin_benchmark(const std::string& name, const Configuration& c, Seed noise_seed = 0);

} // namespace pego
