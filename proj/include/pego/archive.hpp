#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pego/space.hpp"

namespace pego {

struct EvaluationRecord {
    std::size_t index = 0;
    Configuration config;
    double fitness = 0.0;                // internal, minimized
    std::optional<double> raw_metric;    // as reported; empty when failed
    bool failed = false;
    std::string error;                   // evaluator diagnostic when failed
    std::size_t iteration = 0;
    std::optional<double> temperature;   // empty for the initial design
    double wall_time = 0.0;              // seconds

    json to_json() const;
    static EvaluationRecord from_json(const ParameterSpace& space, const json& j);
    friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

/// Append-only ledger of evaluated configurations.
class Archive {
public:
    Archive() = default;
    explicit Archive(ParameterSpace space) : space_(std::move(space)) {}

    const ParameterSpace& space() const noexcept { return space_; }
    const std::vector<EvaluationRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const EvaluationRecord& operator[](std::size_t i) const { return records_.at(i); }

    /// Appends `r`, assigning it the next index. Throws when its
    /// configuration is not valid in the archive's space.
    const EvaluationRecord& append(EvaluationRecord r);

    /// Smallest fitness over non-failed records.
    std::optional<double> y_min() const;
    /// Largest fitness over non-failed records.
    std::optional<double> y_worst() const;
    /// Non-failed record with the smallest fitness (earliest on ties).
    const EvaluationRecord* best() const;

    /// Copy holding only the first `n` records.
    Archive prefix(std::size_t n) const;

private:
    ParameterSpace space_;
    std::vector<EvaluationRecord> records_;
};

struct ArchiveHeader {
    ParameterSpace space;
    json loop = json::object(); // loop configuration, including its seed
    json run = json::object();  // how the run was launched (manifest)

    json to_json() const;
    static ArchiveHeader from_json(const json& j);
};

struct LoadedArchive {
    ArchiveHeader header;
    Archive archive;
};

class ArchiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a line-delimited archive. Throws ArchiveError naming the last valid
/// record when the file is truncated, corrupt, or inconsistent with its
/// embedded space.
LoadedArchive load_archive(const std::filesystem::path& path);

/// Line-delimited JSON archive file: one header line, then one line per
/// record, flushed after every write.
class ArchiveWriter {
public:
    /// Creates (or truncates) `path`, and any missing parent directories,
    /// and writes `header`.
    static ArchiveWriter create(const std::filesystem::path& path, const ArchiveHeader& header);
    /// Opens an existing archive for appending further records.
    static ArchiveWriter append_to(const std::filesystem::path& path);

    void write(const EvaluationRecord& r);

private:
    explicit ArchiveWriter(std::ofstream out) : out_(std::move(out)) {}
    std::ofstream out_;
};

} // namespace pego
