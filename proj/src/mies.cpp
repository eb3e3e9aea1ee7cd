#include "pego/mies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pego/sampler.hpp"

namespace pego {

namespace {

constexpr double kMinSigmaFraction = 1e-12;
// Integer steps may shrink below one so that a converged integer gene
// mostly stays put; geometric differences then rarely move it.
constexpr double kMinIntegerStep = 0.05;

double reflect(double x, double lo, double hi) {
    const double w = hi - lo;
    if (w <= 0.0)
        return lo;
    double y = std::fmod(x - lo, 2.0 * w);
    if (y < 0.0)
        y += 2.0 * w;
    if (y > w)
        y = 2.0 * w - y;
    return std::clamp(lo + y, lo, hi);
}

std::int64_t reflect_int(std::int64_t x, std::int64_t lo, std::int64_t hi) {
    const std::int64_t w = hi - lo;
    if (w == 0)
        return lo;
    std::int64_t y = (x - lo) % (2 * w);
    if (y < 0)
        y += 2 * w;
    if (y > w)
        y = 2 * w - y;
    return lo + y;
}

double geometric(double psi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    return std::floor(std::log1p(-u) / std::log1p(-psi));
}

double sanitize(double f) { return std::isfinite(f) ? f : -std::numeric_limits<double>::infinity(); }

} // namespace

void MiesParams::check() const {
    if (mu < 1 || mu > lambda)
        throw std::invalid_argument("MIES needs 1 <= mu <= lambda");
    if (budget < lambda)
        throw std::invalid_argument("MIES budget must be >= lambda");
    if (!(initial_step_fractions.continuous > 0.0) || !(initial_step_fractions.integer > 0.0))
        throw std::invalid_argument("MIES step fractions must be > 0");
    if (initial_step_fractions.discrete &&
        !(*initial_step_fractions.discrete > 0.0 && *initial_step_fractions.discrete < 1.0))
        throw std::invalid_argument("MIES discrete mutation probability must lie in (0, 1)");
}

json MiesParams::to_json() const {
    json steps{{"continuous", initial_step_fractions.continuous}, {"integer", initial_step_fractions.integer}};
    steps["discrete"] = initial_step_fractions.discrete ? json(*initial_step_fractions.discrete) : json(nullptr);
    return json{{"mu", mu}, {"lambda", lambda}, {"budget", budget}, {"seed", seed}, {"initial_step_fractions", steps}};
}

MiesParams MiesParams::from_json(const json& j) {
    MiesParams p;
    p.mu = j.value("mu", p.mu);
    p.lambda = j.value("lambda", p.lambda);
    p.budget = j.value("budget", p.budget);
    p.seed = j.value("seed", p.seed);
    if (j.contains("initial_step_fractions")) {
        const auto& s = j.at("initial_step_fractions");
        p.initial_step_fractions.continuous = s.value("continuous", p.initial_step_fractions.continuous);
        p.initial_step_fractions.integer = s.value("integer", p.initial_step_fractions.integer);
        if (s.contains("discrete") && !s.at("discrete").is_null())
            p.initial_step_fractions.discrete = s.at("discrete").get<double>();
    }
    p.check();
    return p;
}

// --- MixedMutation -----------------------------------------------------------

MixedMutation::MixedMutation(const ParameterSpace& space, const StepFractions& fractions)
    : space_(space), fractions_(fractions) {
    for (std::size_t i = 0; i < space.size(); ++i) {
        switch (space[i].kind()) {
        case ParameterKind::continuous: continuous_.push_back(i); break;
        case ParameterKind::integer: integer_.push_back(i); break;
        default: discrete_.push_back(i); break;
        }
    }
    auto rates = [](std::size_t n, double& global, double& local) {
        if (n == 0)
            return;
        global = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
        local = 1.0 / std::sqrt(2.0 * std::sqrt(static_cast<double>(n)));
    };
    rates(continuous_.size(), tau_global_c_, tau_local_c_);
    rates(integer_.size(), tau_global_i_, tau_local_i_);
    if (!discrete_.empty()) {
        const auto nd = static_cast<double>(discrete_.size());
        tau_d_ = 1.0 / std::sqrt(2.0 * std::sqrt(nd));
        p_min_ = 1.0 / (3.0 * nd);
    }
}

Strategy MixedMutation::initial_strategy() const {
    Strategy s;
    for (std::size_t i : continuous_)
        s.sigma.push_back(fractions_.continuous * (space_[i].encoded_high() - space_[i].encoded_low()));
    for (std::size_t i : integer_)
        s.int_step.push_back(
            std::max(1.0, fractions_.integer * (space_[i].encoded_high() - space_[i].encoded_low())));
    if (!discrete_.empty()) {
        const double p = fractions_.discrete.value_or(1.0 / static_cast<double>(discrete_.size()));
        s.flip_prob.assign(discrete_.size(), std::clamp(p, p_min_, p_max_));
    }
    return s;
}

void MixedMutation::mutate_genes(std::vector<double>& g, const Strategy& s, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = 0; k < continuous_.size(); ++k) {
        const auto& p = space_[continuous_[k]];
        auto& x = g[continuous_[k]];
        x = reflect(x + s.sigma[k] * normal(rng), p.encoded_low(), p.encoded_high());
    }
    for (std::size_t k = 0; k < integer_.size(); ++k) {
        const auto& p = space_[integer_[k]];
        auto& x = g[integer_[k]];
        // The self-adapted step is a total over all integer genes.
        const double step = s.int_step[k] / static_cast<double>(integer_.size());
        const double psi = 1.0 - step / (1.0 + std::sqrt(1.0 + step * step));
        const double delta = geometric(psi, rng) - geometric(psi, rng);
        const auto lo = static_cast<std::int64_t>(p.encoded_low());
        const auto hi = static_cast<std::int64_t>(p.encoded_high());
        // Reflection has period 2 * (hi - lo); fold long steps before the cast.
        const double period = 2.0 * static_cast<double>(hi - lo);
        const auto d = period > 0.0 ? static_cast<std::int64_t>(std::fmod(delta, period)) : std::int64_t{0};
        x = static_cast<double>(reflect_int(static_cast<std::int64_t>(x) + d, lo, hi));
    }
    for (std::size_t k = 0; k < discrete_.size(); ++k) {
        if (unit(rng) >= s.flip_prob[k])
            continue;
        const auto& p = space_[discrete_[k]];
        const auto levels = static_cast<std::size_t>(p.encoded_high()) + 1;
        const auto current = static_cast<std::size_t>(g[discrete_[k]]);
        std::uniform_int_distribution<std::size_t> pick(0, levels - 2);
        std::size_t next = pick(rng);
        if (next >= current)
            ++next;
        g[discrete_[k]] = static_cast<double>(next);
    }
}

void MixedMutation::mutate(Individual& ind, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& s = ind.strategy;
    if (!continuous_.empty()) {
        const double shared = tau_global_c_ * normal(rng);
        for (std::size_t k = 0; k < continuous_.size(); ++k) {
            const auto& p = space_[continuous_[k]];
            const double range = p.encoded_high() - p.encoded_low();
            s.sigma[k] = std::clamp(s.sigma[k] * std::exp(shared + tau_local_c_ * normal(rng)),
                                    kMinSigmaFraction * range, range);
        }
    }
    if (!integer_.empty()) {
        const double shared = tau_global_i_ * normal(rng);
        for (std::size_t k = 0; k < integer_.size(); ++k) {
            const auto& p = space_[integer_[k]];
            const double range = std::max(1.0, p.encoded_high() - p.encoded_low());
            s.int_step[k] = std::clamp(s.int_step[k] * std::exp(shared + tau_local_i_ * normal(rng)), kMinIntegerStep, range);
        }
    }
    for (auto& prob : s.flip_prob) {
        const double odds = (1.0 - prob) / prob;
        prob = std::clamp(1.0 / (1.0 + odds * std::exp(-tau_d_ * normal(rng))), p_min_, p_max_);
    }
    mutate_genes(ind.genome, s, rng);
}

// --- maximize ----------------------------------------------------------------

MiesResult maximize_encoded(const ParameterSpace& space, const EncodedObjective& objective, const MiesParams& params,
                            const std::optional<std::vector<double>>& warm_start) {
    params.check();
    if (space.size() == 0)
        throw std::invalid_argument("MIES needs a non-empty space");
    std::mt19937_64 rng(derive_seed(params.seed, kStreamMies));
    const MixedMutation mutation(space, params.initial_step_fractions);

    MiesResult result;
    result.fitness = -std::numeric_limits<double>::infinity();
    result.trace.reserve(params.budget);
    auto evaluate = [&](Individual& ind) {
        ind.fitness = sanitize(objective(ind.genome));
        ++result.evaluations;
        if (result.best_genome.empty() || ind.fitness > result.fitness) {
            result.fitness = ind.fitness;
            result.best_genome = ind.genome;
        }
        result.trace.push_back(result.fitness);
    };

    std::vector<Individual> parents;
    auto design = lhs_sample_encoded(space, {params.mu, derive_seed(params.seed, kStreamDesign)});
    if (warm_start)
        design.back() = space.canonicalize(*warm_start);
    for (auto& genome : design) {
        Individual ind{std::move(genome), mutation.initial_strategy(), 0.0};
        evaluate(ind);
        parents.push_back(std::move(ind));
    }

    std::uniform_int_distribution<std::size_t> pick(0, params.mu - 1);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<Individual> offspring(params.lambda);
    while (result.evaluations + params.lambda <= params.budget) {
        for (auto& child : offspring) {
            const Individual& a = parents[pick(rng)];
            const Individual& b = parents[pick(rng)];
            child.genome = a.genome;
            for (std::size_t j = 0; j < child.genome.size(); ++j)
                if (coin(rng))
                    child.genome[j] = b.genome[j];
            child.strategy = a.strategy;
            auto blend = [](std::vector<double>& x, const std::vector<double>& y) {
                for (std::size_t j = 0; j < x.size(); ++j)
                    x[j] = 0.5 * (x[j] + y[j]);
            };
            blend(child.strategy.sigma, b.strategy.sigma);
            blend(child.strategy.int_step, b.strategy.int_step);
            blend(child.strategy.flip_prob, b.strategy.flip_prob);
            mutation.mutate(child, rng);
            evaluate(child);
        }
        std::stable_sort(offspring.begin(), offspring.end(),
                         [](const Individual& x, const Individual& y) { return x.fitness > y.fitness; });
        std::copy_n(offspring.begin(), params.mu, parents.begin());
    }
    result.best = space.decode(result.best_genome);
    return result;
}

MiesResult maximize_detailed(const ParameterSpace& space, const Objective& objective, const MiesParams& params,
                             const std::optional<Configuration>& warm_start) {
    std::optional<std::vector<double>> start;
    if (warm_start)
        start = space.encode(*warm_start);
    return maximize_encoded(
        space, [&](std::span<const double> g) { return objective(space.decode(g)); }, params, start);
}

Configuration maximize(const ParameterSpace& space, const Objective& objective, const MiesParams& params,
                       const std::optional<Configuration>& warm_start) {
    return maximize_detailed(space, objective, params, warm_start).best;
}

std::vector<double> perturb_once(const ParameterSpace& space, std::span<const double> genome,
                                 const StepFractions& fractions, std::mt19937_64& rng) {
    const MixedMutation mutation(space, fractions);
    const Strategy strategy = mutation.initial_strategy();
    std::vector<double> g(genome.begin(), genome.end());
    for (int attempt = 0; attempt < 64; ++attempt) {
        mutation.mutate_genes(g, strategy, rng);
        if (!std::equal(g.begin(), g.end(), genome.begin()))
            break;
    }
    return g;
}

} // namespace pego
