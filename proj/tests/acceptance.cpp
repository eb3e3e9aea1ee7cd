// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Each criterion also has to finish inside its time limit.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/cart_reference.hpp"
#include "oracles/mgf_oracle.hpp"
#include "pego/allcnn.hpp"
#include "pego/benchmarks.hpp"
#include "pego/cli.hpp"
#include "pego/forest.hpp"
#include "pego/infill.hpp"
#include "pego/mies.hpp"
#include "pego/sampler.hpp"
#include "support.hpp"

using namespace pego;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = took < limit_seconds;
    const bool pass = v.pass && in_time;
    if (!pass)
        ++failures;
    std::ostringstream line;
    line.precision(3);
    line << (pass ? "PASS" : "FAIL") << "  " << name << "  [" << v.detail << "; " << std::fixed << took
         << " s of " << limit_seconds << " s" << (in_time ? "" : ", too slow") << "]";
    std::cout << line.str() << std::endl;
}

double relative_error(double got, double want) {
    if (got == want)
        return 0.0;
    return std::abs(got - want) / std::max(std::abs(want), std::numeric_limits<double>::min());
}

double mgf(double y_min, double m, double s2, double t) { return mgf_criterion({m, s2}, {y_min, t}); }

// --- criterion tuples ------------------------------------------------------

struct Tuple {
    double y_min, m, s2, t;
};

Tuple draw_tuple(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> level(-5.0, 5.0), log_s2(-6.0, 1.5), unit(0.0, 1.0);
    std::lognormal_distribution<double> temp(0.0, 1.0);
    Tuple x{level(rng), level(rng), std::pow(10.0, log_s2(rng)), temp(rng)};
    if (unit(rng) < 0.05)
        x.s2 = 0.0;
    if (unit(rng) < 0.2)
        x.m = x.y_min + (unit(rng) - 0.5) * 1e-3; // near-ties of m and y_min
    return x;
}

Verdict mgf_oracle() {
    std::mt19937_64 rng(20240601);
    const double cap = kMgfExponentCap;
    std::size_t compared = 0, saturated = 0, underflow = 0, bad = 0, bad_flags = 0;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const auto x = draw_tuple(rng);
        const auto ref = oracle::mgf(x.y_min, x.m, x.s2, x.t);
        const auto got = mgf_evaluate({x.m, x.s2}, {x.y_min, x.t});
        const bool should_saturate = ref.exponent > cap && !(x.s2 == 0.0 && x.y_min <= x.m);
        if (got.saturated != should_saturate)
            ++bad_flags;
        if (ref.exponent > cap) {
            ++saturated;
            if (!std::isfinite(got.value) || got.value > mgf_saturation_value())
                ++bad_flags;
            continue;
        }
        const double want = static_cast<double>(ref.value);
        if (ref.value < oracle::hp(std::numeric_limits<double>::min())) {
            // Below the normal range only the absolute size can be checked.
            ++underflow;
            if (!(got.value >= 0.0 && got.value <= 2 * std::numeric_limits<double>::min()))
                ++bad;
            continue;
        }
        ++compared;
        const double err = relative_error(got.value, want);
        worst = std::max(worst, err);
        if (err > 1e-12)
            ++bad;
    }
    std::ostringstream d;
    d << compared << " compared, worst rel " << worst << ", " << saturated << " saturated, " << underflow
      << " below normal range, " << bad << " mismatches, " << bad_flags << " bad saturation flags";
    return {bad == 0 && bad_flags == 0 && saturated > 0 && compared > 5000, d.str()};
}

Verdict mgf_properties() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::lognormal_distribution<double> temp(0.0, 1.0);
    std::size_t translation_bad = 0, monotone_bad = 0, monotone_checked = 0, negative = 0, limit_bad = 0;

    // Translation invariance. Levels and shifts live on a dyadic grid so the
    // shifted inputs are exact and only the criterion itself is exercised.
    auto dyadic = [&](double span) { return std::round((unit(rng) - 0.5) * span * 1048576.0) / 1048576.0; };
    for (int i = 0; i < 10000; ++i) {
        const double y = dyadic(10), m = dyadic(10), c = dyadic(200);
        const double s2 = std::pow(10.0, -4 + 5 * unit(rng)), t = temp(rng);
        const double a = mgf(y, m, s2, t), b = mgf(y + c, m + c, s2, t);
        if (relative_error(b, a) > 1e-12)
            ++translation_bad;
    }

    // Strict decrease in m, wherever both values are representable.
    for (int i = 0; i < 10000; ++i) {
        const double y = (unit(rng) - 0.5) * 6, s2 = std::pow(10.0, -2 + 2.5 * unit(rng)), t = temp(rng);
        const double m1 = y + (unit(rng) - 0.5) * 6, m2 = m1 + 1e-3 + 2 * unit(rng);
        const auto a = mgf_evaluate({m1, s2}, {y, t}), b = mgf_evaluate({m2, s2}, {y, t});
        if (b.value < std::numeric_limits<double>::min() || a.saturated)
            continue;
        ++monotone_checked;
        if (!(a.value > b.value))
            ++monotone_bad;
    }

    // Non-negativity over a wide input range, zero variance included.
    for (int i = 0; i < 10000; ++i) {
        const double y = (unit(rng) - 0.5) * 200, m = (unit(rng) - 0.5) * 200;
        const double s2 = unit(rng) < 0.1 ? 0.0 : std::pow(10.0, -12 + 15 * unit(rng));
        const double t = std::exp(6 * (unit(rng) - 0.5));
        const double v = mgf(y, m, s2, t);
        if (!(v >= 0.0) || !std::isfinite(v))
            ++negative;
    }

    // Zero variance: 0 at or above the incumbent, the pure exponential term
    // below it, and the tiny-variance values converge to those limits.
    for (int i = 0; i < 10000; ++i) {
        const double y = (unit(rng) - 0.5) * 6;
        double gap = (unit(rng) - 0.5) * 6;
        if (std::abs(gap) < 1e-3)
            gap = 1e-3;
        const double m = y - gap, t = temp(rng);
        const double limit = mgf(y, m, 0.0, t);
        const double expect = y - m > 0 ? std::exp(std::min((y - m - 1.0) * t, kMgfExponentCap)) : 0.0;
        const double near = mgf(y, m, 1e-24, t);
        if (relative_error(limit, expect) > 1e-12 || relative_error(near, limit) > 1e-9)
            ++limit_bad;
    }
    if (mgf(1.0, 1.0, 0.0, 2.0) != 0.0)
        ++limit_bad;

    std::ostringstream d;
    d << "translation " << translation_bad << ", monotone " << monotone_bad << " of " << monotone_checked
      << ", negative " << negative << ", zero-variance limit " << limit_bad << " failures";
    return {translation_bad + monotone_bad + negative + limit_bad == 0 && monotone_checked > 9000, d.str()};
}

// --- forest --------------------------------------------------------------

Verdict forest_oracle() {
    std::mt19937_64 rng(314);
    std::uniform_real_distribution<double> u(-1, 1);
    std::size_t mismatches = 0, checks = 0;
    double worst = 0;
    for (int set = 0; set < 20; ++set) {
        const std::size_t n = 5 + rng() % 46, d = 1 + rng() % 5;
        std::vector<std::vector<double>> X(n, std::vector<double>(d));
        std::vector<double> Y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : X[i])
                v = u(rng);
            if (set % 3 == 0)
                X[i][0] = std::round(X[i][0] * 4) / 4; // tied feature values
            Y[i] = std::sin(3 * X[i][0]) + (d > 1 ? X[i][1] * X[i][1] : 0.0) + 0.2 * u(rng);
        }
        ForestParams p;
        p.trees = 10 + rng() % 41;
        p.seed = rng();
        p.feature_subset = 1.0;
        if (set % 4 == 1)
            p.max_depth = 1 + rng() % 4;
        if (set % 5 == 2)
            p.min_samples_leaf = 1 + rng() % 4;
        const auto f = Forest::fit(X, Y, p);
        std::vector<oracle::CartTree> ref;
        for (std::size_t t = 0; t < f.size(); ++t)
            ref.emplace_back(X, Y, f.training_rows(t),
                             oracle::CartOptions{p.max_depth, p.min_samples_leaf});
        for (int probe = 0; probe < 20; ++probe) {
            std::vector<double> x(d);
            for (auto& v : x)
                v = 1.2 * u(rng);
            if (probe < 5)
                x = X[rng() % n];
            const auto per_tree = f.tree_predictions(x);
            std::vector<double> expect;
            for (std::size_t t = 0; t < f.size(); ++t) {
                expect.push_back(ref[t].predict(x));
                ++checks;
                worst = std::max(worst, relative_error(per_tree[t], expect.back()));
                if (!oracle::close_relative(per_tree[t], expect.back(), 1e-9))
                    ++mismatches;
            }
            const auto pred = f.predict(x);
            const auto agg = oracle::aggregate(expect);
            checks += 2;
            if (!oracle::close_relative(pred.mean, agg.mean, 1e-9) ||
                !oracle::close_relative(pred.variance, agg.variance, 1e-9))
                ++mismatches;
        }
    }
    std::ostringstream d;
    d << checks << " comparisons over 20 datasets, " << mismatches << " mismatches, worst per-tree rel " << worst;
    return {mismatches == 0, d.str()};
}

// --- LHS -------------------------------------------------------------------

ParameterSpace mixed_space(std::mt19937_64& rng) {
    for (;;) {
        auto s = testing_support::random_space(rng);
        const auto& ps = s.params();
        if (std::any_of(ps.begin(), ps.end(), [](const auto& p) { return p.kind() == ParameterKind::continuous; }))
            return s;
    }
}

Verdict lhs_stratification() {
    std::mt19937_64 rng(99);
    std::size_t ok = 0, total = 0;
    for (std::size_t n : {1, 4, 25, 100}) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto s = trial == 0 ? allcnn::space(3) : mixed_space(rng);
            const auto design = lhs_sample(s, {n, rng()});
            bool good = design.size() == n;
            for (const auto& c : design)
                good = good && s.validate(c).empty();
            for (std::size_t j = 0; good && j < s.size(); ++j) {
                if (s[j].kind() != ParameterKind::continuous)
                    continue;
                const double lo = s[j].encoded_low(), hi = s[j].encoded_high();
                std::vector<std::size_t> strata;
                for (const auto& c : design) {
                    const double x = s.encode(c)[j];
                    const auto k = static_cast<std::size_t>(std::floor((x - lo) / (hi - lo) * double(n)));
                    strata.push_back(std::min(k, n - 1));
                }
                std::sort(strata.begin(), strata.end());
                std::vector<std::size_t> expect(n);
                std::iota(expect.begin(), expect.end(), std::size_t{0});
                good = strata == expect;
            }
            ++total;
            ok += good;
        }
    }
    return {ok == total, std::to_string(ok) + " of " + std::to_string(total) + " designs exactly stratified"};
}

// --- MIES ------------------------------------------------------------------

Verdict mies_convergence() {
    const auto& b = benchmark("mixed_quadratic");
    std::size_t exact = 0;
    double worst = 0;
    for (Seed seed = 1; seed <= 20; ++seed) {
        MiesParams p;
        p.budget = 2000;
        p.seed = seed;
        const auto best =
            maximize(b.space, [](const Configuration& c) { return -builtin_benchmark("mixed_quadratic", c); }, p);
        bool good = true;
        for (const auto& spec : b.space.params()) {
            const auto& n = spec.name();
            switch (spec.kind()) {
            case ParameterKind::continuous: {
                const double err = std::abs(best.real(n) - b.optimum.real(n));
                worst = std::max(worst, err);
                good = good && err <= 1e-2;
                break;
            }
            case ParameterKind::integer:
                good = good && best.integer(n) == b.optimum.integer(n);
                break;
            case ParameterKind::categorical:
                good = good && best.level(n) == b.optimum.level(n);
                break;
            case ParameterKind::boolean:
                good = good && best.flag(n) == b.optimum.flag(n);
                break;
            }
        }
        exact += good;
    }
    std::ostringstream d;
    d << exact << " of 20 runs at the optimum, worst continuous error " << worst;
    return {exact == 20, d.str()};
}

// --- end-to-end ------------------------------------------------------------

Verdict ego_vs_random() {
    LoopConfig cfg;
    cfg.q = 5;
    cfg.init_batches = 5;
    cfg.max_evaluations = 100;
    const auto cmp = compare_with_random_search("mixed_multimodal", 20, 1, cfg);
    std::ostringstream d;
    d << cmp.wins << " wins, " << cmp.losses << " losses of 20, sign test p " << cmp.sign_test_p;
    return {cmp.wins >= 16 && cmp.sign_test_p < 0.05, d.str()};
}

int run_cli(const std::string& args) {
    const auto cmd = std::string("'") + PEGO_CLI + "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (WIFSIGNALED(status))
        return 128 + WTERMSIG(status);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism_and_resume() {
    testing_support::TempDir dir;
    const json loop{{"q", 5}, {"init_batches", 5}, {"max_evaluations", 100}, {"seed", 2024}, {"record_wall_time", false}};
    const json builtin{{"evaluator", "builtin:mixed_multimodal"}, {"loop", loop}, {"output", "run.jsonl"}};
    testing_support::write_file(dir / "builtin.json", builtin.dump(2));

    const auto manifest = "--manifest '" + (dir / "builtin.json").string() + "'";
    if (run_cli("run " + manifest) != 0)
        return {false, "first run failed"};
    const auto first = testing_support::read_file(dir / "run.jsonl");
    if (run_cli("run --force " + manifest) != 0)
        return {false, "second run failed"};
    const bool identical = testing_support::read_file(dir / "run.jsonl") == first;

    // Same run with an external evaluator that SIGKILLs the optimizer when
    // request e50 arrives, i.e. right after record 50 is persisted.
    auto external = [&](const std::string& mode, const std::string& out) {
        json j{{"space", "benchmark:mixed_multimodal"},
               {"evaluator",
                {{"command",
                  {PEGO_FAKE_EVALUATOR, mode, "50", (dir / "killed").string(), "mixed_multimodal"}},
                 {"handshake_timeout", 10}}},
               {"loop", loop},
               {"output", out}};
        return j;
    };
    testing_support::write_file(dir / "killed.json", external("kill-parent-at", "killed.jsonl").dump(2));
    const int killed = run_cli("run --manifest '" + (dir / "killed.json").string() + "'");
    const auto partial = load_archive(dir / "killed.jsonl").archive.size();
    if (run_cli("resume --archive '" + (dir / "killed.jsonl").string() + "'") != 0)
        return {false, "resume failed"};
    const auto resumed = load_archive(dir / "killed.jsonl").archive;
    const auto reference = load_archive(dir / "run.jsonl").archive;
    const bool same_records = resumed.records() == reference.records();

    std::ostringstream d;
    d << "repeat runs " << (identical ? "byte-identical" : "DIFFER") << "; killed with status " << killed << " at "
      << partial << " records; resumed to " << resumed.size() << " records, "
      << (same_records ? "identical to" : "DIFFERENT from") << " the uninterrupted run";
    return {identical && killed == 128 + SIGKILL && partial == 50 && resumed.size() == reference.size() &&
                same_records,
            d.str()};
}

// --- All-CNN ---------------------------------------------------------------

bool bounds_match(const ParameterSpace& s, std::string& why) {
    const std::vector<std::string> acts{"elu", "relu", "tanh", "selu", "sigmoid"};
    for (const auto& p : s.params()) {
        const auto& n = p.name();
        bool good;
        if (n.rfind("f_", 0) == 0)
            good = p.kind() == ParameterKind::integer && p.low() == 1 && p.high() == 512;
        else if (n.rfind("k_", 0) == 0)
            good = p.kind() == ParameterKind::integer && p.low() == 1 && p.high() == 8;
        else if (n.rfind("s_out_", 0) == 0)
            good = p.kind() == ParameterKind::integer && p.low() == 1 && p.high() == 5;
        else if (n.rfind("n_", 0) == 0)
            good = p.kind() == ParameterKind::integer && p.low() == 1 && p.high() == 6;
        else if (n.rfind("d_", 0) == 0)
            good = p.kind() == ParameterKind::continuous && p.low() == 1e-5 && p.high() == 0.8;
        else if (n == "l2")
            good = p.kind() == ParameterKind::continuous && p.low() == 1e-5 && p.high() == 1e-2;
        else if (n == "lr")
            good = p.kind() == ParameterKind::continuous && p.low() == 1e-5 && p.high() == 1.0;
        else if (n == "activation" || n == "activation_out")
            good = p.kind() == ParameterKind::categorical && p.levels() == acts;
        else
            good = n == "global_pooling" && p.kind() == ParameterKind::boolean;
        if (!good) {
            why = n;
            return false;
        }
    }
    return true;
}

// Walks the serialized layer list against the configuration: input dropout
// and conv, then per stack n convs, one strided output conv and a dropout,
// then optional global pooling and the dense classifier.
bool ordering_holds(const json& d, const Configuration& c) {
    const auto& layers = d.at("layers");
    std::size_t i = 0;
    auto next = [&](const char* kind) -> const json* {
        if (i >= layers.size() || layers[i].at("kind") != kind)
            return nullptr;
        return &layers[i++];
    };
    auto conv = [&](const char* kind, std::int64_t f, std::int64_t k, std::int64_t stride) {
        const json* l = next(kind);
        return l && l->at("filters") == f && l->at("kernel") == k && l->at("stride") == stride &&
               l->at("activation") == c.level("activation") && l->at("l2") == c.real("l2");
    };
    auto dropout = [&](const std::string& name) {
        const json* l = next("dropout");
        return l && l->at("rate") == c.real(name);
    };
    if (!dropout("d_0") || !conv("conv", c.integer("f_0"), c.integer("k_0"), 1))
        return false;
    for (int s = 1; s <= 3; ++s) {
        const auto k = std::to_string(s);
        for (std::int64_t r = 0; r < c.integer("n_" + k); ++r)
            if (!conv("conv", c.integer("f_" + k), c.integer("k_" + k), 1))
                return false;
        if (!conv("conv_out", c.integer("f_out_" + k), c.integer("k_out_" + k), c.integer("s_out_" + k)) ||
            !dropout("d_" + k))
            return false;
    }
    if (c.flag("global_pooling") && !next("global_pooling"))
        return false;
    const json* dense = next("dense");
    return dense && dense->at("units") == 10 && dense->at("activation") == c.level("activation_out") &&
           i == layers.size() && d.at("training").at("learning_rate") == c.real("lr");
}

Verdict allcnn_schema() {
    const auto s = allcnn::space(3);
    std::string why;
    if (s.size() != 29)
        return {false, std::to_string(s.size()) + " parameters"};
    if (!bounds_match(s, why))
        return {false, "bounds differ for " + why};
    std::mt19937_64 rng(2718);
    std::size_t ok = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto c = uniform_sample(s, rng);
        if (!s.validate(c).empty())
            continue;
        const auto text = allcnn::descriptor_serialize(allcnn::to_descriptor(c, 10));
        ok += ordering_holds(json::parse(text), c);
    }
    return {ok == 1000, "29 parameters with documented bounds; " + std::to_string(ok) +
                            " of 1000 descriptors satisfy the layer ordering"};
}

} // namespace

int main() {
    criterion("mgf criterion matches high-precision oracle", 5, mgf_oracle);
    criterion("mgf criterion properties", 5, mgf_properties);
    criterion("forest matches brute-force CART reference", 60, forest_oracle);
    criterion("latin hypercube stratification", 10, lhs_stratification);
    criterion("MIES converges on the mixed quadratic", 30, mies_convergence);
    criterion("EGO beats random search on the mixed multimodal benchmark", 600, ego_vs_random);
    criterion("deterministic archives and kill-and-resume", 120, determinism_and_resume);
    criterion("All-CNN schema and descriptor ordering", 5, allcnn_schema);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
