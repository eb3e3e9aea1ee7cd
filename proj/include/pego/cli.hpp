#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pego/allcnn.hpp"
#include "pego/archive.hpp"
#include "pego/evalproto.hpp"
#include "pego/loop.hpp"
#include "pego/space.hpp"

namespace pego {

/// Exit statuses of the command-line entry points.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1, // run aborted, unreadable archive, I/O error
    kExitUsage = 2,   // invalid manifest or arguments
};

/// Environment variable giving the default number of parallel evaluator
/// slots; a manifest's "slots" field takes precedence.
inline constexpr const char* kSlotsEnv = "PEGO_SLOTS";

struct EvaluatorSpec {
    std::optional<std::string> builtin;  // benchmark name
    std::vector<std::string> command;    // external evaluator argv
    std::optional<double> deadline;      // seconds per evaluation
    double handshake_timeout = 120.0;
    Seed noise_seed = 0;                 // for stochastic benchmarks

    json to_json() const;
};

/// Single-file description of a run. Relative paths inside it are resolved
/// against the directory holding the manifest.
struct RunManifest {
    std::string space_ref;    // "allcnn:q=3", "benchmark:NAME" or a schema path
    ParameterSpace space;
    EvaluatorSpec evaluator;
    LoopConfig loop;
    std::optional<std::size_t> slots;
    std::size_t classes = 10;
    allcnn::TrainingOverrides training;
    std::filesystem::path output;
    std::filesystem::path base_dir;

    /// Throws std::invalid_argument describing the first problem found.
    static RunManifest from_json(const json& j, const std::filesystem::path& base_dir);
    static RunManifest load(const std::filesystem::path& path);
    /// Normalized form stored in the archive header.
    json to_json() const;
};

/// Resolves a space reference: "allcnn:q=N", "benchmark:NAME", or the path
/// of a schema file (relative to `base_dir`).
ParameterSpace resolve_space(const std::string& ref, const std::filesystem::path& base_dir);

/// Manifest slots, else $PEGO_SLOTS, else the batch size.
std::size_t resolve_slots(const RunManifest& m);

std::unique_ptr<Evaluator> make_evaluator(const RunManifest& m);

/// Run options for `m`; attaches network descriptors when the space is the
/// All-CNN space.
RunOptions make_run_options(const RunManifest& m);

int cmd_run(const std::filesystem::path& manifest, bool force, std::ostream& out, std::ostream& err);
int cmd_resume(const std::filesystem::path& archive, const std::optional<std::filesystem::path>& manifest,
               std::ostream& out, std::ostream& err);

/// Writes the per-evaluation trace as CSV and returns the summary: best
/// configuration and fitness, counts, and the final 20-point moving
/// average of the raw metric. Throws std::invalid_argument on an empty
/// archive.
json write_report(const Archive& archive, std::ostream& csv);
int cmd_report(const std::filesystem::path& archive, const std::filesystem::path& csv_out, std::ostream& out,
               std::ostream& err);

struct ComparisonTrial {
    Seed seed = 0;
    double ego_best = 0.0;
    double random_best = 0.0;
};

struct BenchmarkComparison {
    std::string name;
    std::vector<ComparisonTrial> trials;
    std::size_t wins = 0;   // EGO strictly better
    std::size_t losses = 0; // random search strictly better
    double sign_test_p = 1.0; // one-sided, ties dropped

    json to_json() const;
};

/// Paired trials of the EGO loop against uniform random search with the
/// same evaluation budget on builtin benchmark `name`. Trial i uses seed
/// base_seed + i for both arms.
BenchmarkComparison compare_with_random_search(const std::string& name, std::size_t trials, Seed base_seed,
                                               const LoopConfig& cfg);

/// P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p_value(std::size_t wins, std::size_t losses);

int cmd_benchmark(const std::string& name, std::size_t trials, Seed seed, const LoopConfig& cfg, std::ostream& out,
                  std::ostream& err);

/// Prints the schema document of a space reference.
int cmd_schema(const std::string& space_ref, std::ostream& out, std::ostream& err);

} // namespace pego
