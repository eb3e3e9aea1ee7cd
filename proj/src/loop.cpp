#include "pego/loop.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "pego/infill.hpp"
#include "pego/sampler.hpp"

namespace pego {

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const char* what) {
    if (!j.is_object())
        throw std::invalid_argument(std::string(what) + " must be an object");
    for (const auto& [key, _] : j.items())
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw std::invalid_argument(std::string(what) + " has unknown field '" + key + "'");
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first
// exception after all threads have joined.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&](std::size_t worker) {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i, worker);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(body, w);
    }
    if (error)
        std::rethrow_exception(error);
}

// Position of the batch that record `n` belongs to.
struct BatchPosition {
    std::size_t iteration;
    std::size_t start; // index of the batch's first record
};

BatchPosition position_of(const LoopConfig& cfg, std::size_t n) {
    const auto n_init = cfg.initial_design_size();
    if (n < n_init)
        return {n / cfg.q, (n / cfg.q) * cfg.q};
    const auto k = (n - n_init) / cfg.q;
    return {cfg.init_batches + k, n_init + k * cfg.q};
}

double penalty_fitness(const Archive& archive) {
    const auto worst = archive.y_worst();
    return worst ? *worst + 1.0 : 1.0;
}

class Driver {
public:
    Driver(const LoopConfig& cfg, Evaluator& evaluator, const RunOptions& options, Archive archive,
           std::optional<ArchiveWriter> writer)
        : cfg_(cfg), evaluator_(evaluator), options_(options), archive_(std::move(archive)),
          writer_(std::move(writer)) {}

    Archive run() {
        const auto& space = archive_.space();
        std::vector<Configuration> design;
        while (archive_.size() < cfg_.max_evaluations) {
            const auto pos = position_of(cfg_, archive_.size());
            const auto count = std::min(cfg_.q, cfg_.max_evaluations - pos.start);
            std::vector<Proposal> batch;
            if (pos.iteration < cfg_.init_batches) {
                if (design.empty())
                    design = lhs_sample(space, {cfg_.initial_design_size(), derive_seed(cfg_.seed, kStreamDesign)});
                for (std::size_t i = 0; i < count; ++i)
                    batch.push_back({design[pos.start + i], 0.0});
            } else {
                batch = propose_batch(archive_.prefix(pos.start), cfg_, iteration_seed(cfg_.seed, pos.iteration),
                                      count);
            }
            if (!evaluate_batch(pos, batch))
                break;
            if (options_.hooks.on_batch)
                options_.hooks.on_batch(pos.iteration, archive_);
        }
        return std::move(archive_);
    }

private:
    // Evaluates the part of `batch` not yet archived. Returns false when a
    // hook asked to stop.
    bool evaluate_batch(const BatchPosition& pos, const std::vector<Proposal>& batch) {
        const auto& space = archive_.space();
        const auto first = archive_.size() - pos.start;
        const auto n = batch.size() - first;
        const bool initial = pos.iteration < cfg_.init_batches;

        std::vector<EvalRequest> requests(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = batch[first + i].config;
            if (auto v = space.validate(c); !v.empty())
                throw InvalidConfiguration(std::move(v));
            auto& r = requests[i];
            r.id = "e" + std::to_string(pos.start + first + i);
            r.config = c.to_json();
            if (options_.hooks.descriptor)
                r.descriptor = options_.hooks.descriptor(c);
            r.deadline = options_.deadline;
        }

        std::vector<EvalResponse> responses(n);
        std::vector<double> wall(n, 0.0);
        parallel_for(n, evaluator_.slots(), [&](std::size_t i, std::size_t slot) {
            const auto t0 = std::chrono::steady_clock::now();
            responses[i] = evaluator_.evaluate(requests[i], slot);
            wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        });

        for (std::size_t i = 0; i < n; ++i) {
            const auto& resp = responses[i];
            if (resp.transport_error)
                throw RunAborted("evaluator unreachable at record " + std::to_string(archive_.size()) + ": " +
                                     resp.diagnostics.value("detail", resp.diagnostics.dump()),
                                 archive_);
            EvaluationRecord rec;
            rec.config = batch[first + i].config;
            rec.iteration = pos.iteration;
            if (!initial)
                rec.temperature = batch[first + i].temperature;
            rec.wall_time = cfg_.record_wall_time ? wall[i] : 0.0;
            if (resp.ok() && std::isfinite(resp.metric)) {
                rec.raw_metric = resp.metric;
                rec.fitness = cfg_.minimize ? resp.metric : -resp.metric;
            } else {
                rec.failed = true;
                rec.error = resp.ok() ? "non-finite metric" : resp.diagnostics.value("error", std::string("failed"));
                rec.fitness = penalty_fitness(archive_);
            }
            const auto& stored = archive_.append(std::move(rec));
            if (writer_)
                writer_->write(stored);
            if (options_.hooks.on_record && !options_.hooks.on_record(stored))
                return false;
        }
        return true;
    }

    const LoopConfig& cfg_;
    Evaluator& evaluator_;
    const RunOptions& options_;
    Archive archive_;
    std::optional<ArchiveWriter> writer_;
};

} // namespace

void LoopConfig::check() const {
    if (q < 1)
        throw std::invalid_argument("loop.q must be >= 1");
    if (init_batches < 1)
        throw std::invalid_argument("loop.init_batches must be >= 1");
    if (max_evaluations < initial_design_size())
        throw std::invalid_argument("loop.max_evaluations must be >= q * init_batches");
    forest.check();
    mies.check();
}

json LoopConfig::to_json() const {
    return json{{"q", q},
                {"init_batches", init_batches},
                {"max_evaluations", max_evaluations},
                {"seed", seed},
                {"minimize", minimize},
                {"record_wall_time", record_wall_time},
                {"forest", forest.to_json()},
                {"mies", mies.to_json()}};
}

LoopConfig LoopConfig::from_json(const json& j) {
    reject_unknown_keys(j, {"q", "init_batches", "max_evaluations", "seed", "minimize", "record_wall_time", "forest",
                            "mies"},
                        "loop");
    LoopConfig c;
    c.q = j.value("q", c.q);
    c.init_batches = j.value("init_batches", c.init_batches);
    c.max_evaluations = j.value("max_evaluations", c.max_evaluations);
    c.seed = j.value("seed", c.seed);
    c.minimize = j.value("minimize", c.minimize);
    c.record_wall_time = j.value("record_wall_time", c.record_wall_time);
    if (j.contains("forest"))
        c.forest = ForestParams::from_json(j.at("forest"));
    if (j.contains("mies"))
        c.mies = MiesParams::from_json(j.at("mies"));
    c.check();
    return c;
}

Seed iteration_seed(Seed seed, std::size_t iteration) noexcept {
    return derive_seed(seed, kStreamIteration, iteration);
}

std::vector<Proposal> propose_batch(const Archive& archive, const LoopConfig& cfg, Seed it_seed,
                                    std::optional<std::size_t> count) {
    if (archive.empty())
        throw std::invalid_argument("propose_batch needs a non-empty archive");
    const auto& space = archive.space();
    const auto n = std::min(count.value_or(cfg.q), cfg.q);

    std::vector<std::vector<double>> X;
    std::vector<double> Y;
    X.reserve(archive.size());
    for (const auto& r : archive.records()) {
        X.push_back(space.encode(r.config));
        Y.push_back(r.fitness);
    }
    auto forest_params = cfg.forest;
    forest_params.seed = derive_seed(it_seed, kStreamForest, cfg.forest.seed);
    const auto forest = Forest::fit(X, Y, forest_params);

    // Incumbent: best successful record, or the least-penalized one if all failed.
    const EvaluationRecord* incumbent = archive.best();
    if (!incumbent)
        incumbent = &*std::min_element(archive.records().begin(), archive.records().end(),
                                       [](const auto& a, const auto& b) { return a.fitness < b.fitness; });
    const double y_min = incumbent->fitness;
    const auto warm = space.encode(incumbent->config);

    auto temperatures = sample_temperatures(cfg.q, derive_seed(it_seed, kStreamTemperature));
    temperatures.resize(n);

    std::vector<std::vector<double>> genomes(n);
    parallel_for(n, n, [&](std::size_t i, std::size_t) {
        auto params = cfg.mies;
        params.seed = derive_seed(derive_seed(it_seed, kStreamMies, i), cfg.mies.seed);
        const InfillContext ctx{y_min, temperatures[i]};
        auto objective = [&](std::span<const double> x) { return mgf_criterion(forest.predict(x), ctx); };
        genomes[i] = maximize_encoded(space, objective, params, warm).best_genome;
    });

    std::set<std::vector<double>> seen(X.begin(), X.end());
    std::vector<Proposal> out;
    out.reserve(n);
    // Duplicates are detected on the encoding of the decoded configuration,
    // which is how archived configurations are compared.
    for (std::size_t i = 0; i < n; ++i) {
        auto c = space.decode(space.canonicalize(genomes[i]));
        auto key = space.encode(c);
        if (seen.count(key)) {
            std::mt19937_64 rng(derive_seed(it_seed, kStreamPerturb, i));
            // One mutation step; repeated only while it lands on a known point.
            for (int attempt = 0; attempt < 100 && seen.count(key); ++attempt) {
                c = space.decode(space.canonicalize(
                    perturb_once(space, genomes[i], cfg.mies.initial_step_fractions, rng)));
                key = space.encode(c);
            }
        }
        seen.insert(std::move(key));
        out.push_back({std::move(c), temperatures[i]});
    }
    return out;
}

Archive run(const ParameterSpace& space, Evaluator& evaluator, const LoopConfig& cfg, const RunOptions& options) {
    cfg.check();
    if (space.size() == 0)
        throw std::invalid_argument("cannot optimize over an empty space");
    evaluator.start();
    std::optional<ArchiveWriter> writer;
    if (options.archive_path)
        writer = ArchiveWriter::create(*options.archive_path, ArchiveHeader{space, cfg.to_json(), options.run_info});
    return Driver(cfg, evaluator, options, Archive(space), std::move(writer)).run();
}

Archive resume(const std::filesystem::path& archive_path, Evaluator& evaluator, const RunOptions& options,
               const ParameterSpace* expected_space) {
    auto loaded = load_archive(archive_path);
    if (expected_space && *expected_space != loaded.header.space)
        throw ArchiveError("archive " + archive_path.string() + " was produced for a different space");
    LoopConfig cfg;
    try {
        cfg = LoopConfig::from_json(loaded.header.loop);
    } catch (const std::exception& e) {
        throw ArchiveError("archive " + archive_path.string() + " has an invalid loop configuration: " + e.what());
    }
    if (loaded.archive.size() >= cfg.max_evaluations)
        return std::move(loaded.archive);
    evaluator.start();
    return Driver(cfg, evaluator, options, std::move(loaded.archive), ArchiveWriter::append_to(archive_path)).run();
}

} // namespace pego
