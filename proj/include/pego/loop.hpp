#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pego/archive.hpp"
#include "pego/evalproto.hpp"
#include "pego/forest.hpp"
#include "pego/mies.hpp"
#include "pego/seed.hpp"
#include "pego/space.hpp"

namespace pego {

struct LoopConfig {
    std::size_t q = 5;
    std::size_t init_batches = 5;
    std::size_t max_evaluations = 200;
    Seed seed = 0;
    /// When false (the default) evaluator metrics are higher-is-better and
    /// are negated into the internal minimized fitness.
    bool minimize = false;
    /// Wall times are written as 0 when disabled, making archives of
    /// deterministic evaluators byte-reproducible.
    bool record_wall_time = true;
    ForestParams forest;
    MiesParams mies;

    void check() const;
    std::size_t initial_design_size() const noexcept { return q * init_batches; }
    json to_json() const;
    static LoopConfig from_json(const json& j);
};

struct Proposal {
    Configuration config;
    double temperature = 1.0;
};

struct RunHooks {
    /// Optional descriptor document attached to every request.
    std::function<std::optional<json>(const Configuration&)> descriptor;
    /// Called after each record is appended and persisted; returning false
    /// stops the run at that point (the archive stays resumable).
    std::function<bool(const EvaluationRecord&)> on_record;
    /// Called after each completed batch.
    std::function<void(std::size_t iteration, const Archive&)> on_batch;
};

struct RunOptions {
    std::optional<std::filesystem::path> archive_path;
    json run_info = json::object(); // embedded in the archive header
    std::optional<double> deadline; // per-evaluation seconds
    RunHooks hooks;
};

/// Raised when the evaluator cannot be reached; the records appended up to
/// that point are kept in the archive file.
class RunAborted : public std::runtime_error {
public:
    RunAborted(const std::string& what, Archive partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const Archive& partial() const noexcept { return partial_; }

private:
    Archive partial_;
};

/// Batch-parallel EGO: evaluates a q * init_batches LHS design in batches of
/// q, then repeatedly refits the forest on every record, draws q
/// temperatures and evaluates the q MIES maximizers of the MGF criterion,
/// until max_evaluations records exist.
///
/// Each batch of q requests is dispatched concurrently over the evaluator's
/// slots; records are appended in proposal order, so results do not depend
/// on completion order. Failed evaluations are recorded with fitness equal
/// to the worst successful fitness so far plus one.
Archive run(const ParameterSpace& space, Evaluator& evaluator, const LoopConfig& cfg, const RunOptions& options = {});

/// The q proposals (or `count`, if smaller) for one iteration, each
/// maximizing M(.; t_i) under a forest fitted to every archived record.
/// Proposals that repeat an archived configuration (or an earlier proposal
/// of the batch) are perturbed by a mutation step.
std::vector<Proposal> propose_batch(const Archive& archive, const LoopConfig& cfg, Seed iteration_seed,
                                    std::optional<std::size_t> count = std::nullopt);

/// Continues the run stored at `archive_path`, reusing its header's space
/// and loop configuration. Records already present are not re-evaluated and
/// the continuation is identical to an uninterrupted run. Throws
/// ArchiveError when `expected_space` is given and differs from the
/// archive's space, or when the file is corrupt.
Archive resume(const std::filesystem::path& archive_path, Evaluator& evaluator, const RunOptions& options = {},
               const ParameterSpace* expected_space = nullptr);

/// Seed that drives iteration `iteration` of a run seeded with `seed`.
Seed iteration_seed(Seed seed, std::size_t iteration) noexcept;

} // namespace pego
