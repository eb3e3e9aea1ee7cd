#include "pego/archive.hpp"

#include <algorithm>
#include <cmath>

namespace pego {

json EvaluationRecord::to_json() const {
    json j{{"index", index},
           {"iteration", iteration},
           {"config", config.to_json()},
           {"fitness", fitness},
           {"raw_metric", raw_metric ? json(*raw_metric) : json(nullptr)},
           {"status", failed ? "failed" : "ok"},
           {"temperature", temperature ? json(*temperature) : json(nullptr)},
           {"wall_time", wall_time}};
    if (failed)
        j["error"] = error;
    return j;
}

EvaluationRecord EvaluationRecord::from_json(const ParameterSpace& space, const json& j) {
    EvaluationRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.iteration = j.at("iteration").get<std::size_t>();
    r.config = space.parse_configuration(j.at("config"));
    r.fitness = j.at("fitness").get<double>();
    if (!j.at("raw_metric").is_null())
        r.raw_metric = j.at("raw_metric").get<double>();
    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed")
        throw std::invalid_argument("unknown record status '" + status + "'");
    r.failed = status == "failed";
    if (r.failed)
        r.error = j.value("error", "");
    if (!j.at("temperature").is_null())
        r.temperature = j.at("temperature").get<double>();
    r.wall_time = j.at("wall_time").get<double>();
    if (!std::isfinite(r.fitness))
        throw std::invalid_argument("record fitness is not finite");
    if (!r.failed && !r.raw_metric)
        throw std::invalid_argument("ok record lacks raw_metric");
    return r;
}

const EvaluationRecord& Archive::append(EvaluationRecord r) {
    if (auto v = space_.validate(r.config); !v.empty())
        throw InvalidConfiguration(std::move(v));
    r.index = records_.size();
    records_.push_back(std::move(r));
    return records_.back();
}

std::optional<double> Archive::y_min() const {
    const auto* b = best();
    return b ? std::optional(b->fitness) : std::nullopt;
}

std::optional<double> Archive::y_worst() const {
    std::optional<double> worst;
    for (const auto& r : records_)
        if (!r.failed && (!worst || r.fitness > *worst))
            worst = r.fitness;
    return worst;
}

const EvaluationRecord* Archive::best() const {
    const EvaluationRecord* b = nullptr;
    for (const auto& r : records_)
        if (!r.failed && (!b || r.fitness < b->fitness))
            b = &r;
    return b;
}

Archive Archive::prefix(std::size_t n) const {
    Archive a(space_);
    a.records_.assign(records_.begin(), records_.begin() + static_cast<std::ptrdiff_t>(std::min(n, records_.size())));
    return a;
}

json ArchiveHeader::to_json() const {
    return json{{"format", "pego-archive"}, {"version", 1}, {"space", space.to_json()}, {"loop", loop}, {"run", run}};
}

ArchiveHeader ArchiveHeader::from_json(const json& j) {
    if (!j.is_object() || j.value("format", "") != "pego-archive")
        throw std::invalid_argument("not a pego archive header");
    if (j.value("version", 0) != 1)
        throw std::invalid_argument("unsupported archive version");
    ArchiveHeader h;
    h.space = ParameterSpace::from_json(j.at("space"));
    h.loop = j.at("loop");
    h.run = j.value("run", json::object());
    return h;
}

LoadedArchive load_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ArchiveError("cannot open archive " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.empty())
        throw ArchiveError("archive " + path.string() + " is empty");

    LoadedArchive out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto last_valid = [&]() -> std::string {
        if (out.archive.empty())
            return "no valid records";
        return "last valid record is index " + std::to_string(out.archive.records().back().index);
    };
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        ++line_no;
        if (nl == std::string::npos)
            throw ArchiveError("archive " + path.string() + " is truncated at line " + std::to_string(line_no) +
                               "; " + last_valid());
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        try {
            const auto j = json::parse(line);
            if (line_no == 1) {
                out.header = ArchiveHeader::from_json(j);
                out.archive = Archive(out.header.space);
                continue;
            }
            auto r = EvaluationRecord::from_json(out.header.space, j);
            if (r.index != out.archive.size())
                throw std::invalid_argument("record index " + std::to_string(r.index) + " out of sequence");
            out.archive.append(std::move(r));
        } catch (const std::exception& e) {
            if (line_no == 1)
                throw ArchiveError("archive " + path.string() + " has an invalid header: " + e.what());
            throw ArchiveError("archive " + path.string() + " is corrupt at line " + std::to_string(line_no) + " (" +
                               e.what() + "); " + last_valid());
        }
    }
    if (line_no == 0)
        throw ArchiveError("archive " + path.string() + " has no header");
    return out;
}

ArchiveWriter ArchiveWriter::create(const std::filesystem::path& path, const ArchiveHeader& header) {
    std::error_code ec;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ArchiveError("cannot write archive " + path.string());
    out << header.to_json().dump() << '\n';
    out.flush();
    return ArchiveWriter(std::move(out));
}

ArchiveWriter ArchiveWriter::append_to(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        throw ArchiveError("cannot append to archive " + path.string());
    return ArchiveWriter(std::move(out));
}

void ArchiveWriter::write(const EvaluationRecord& r) {
    out_ << r.to_json().dump() << '\n';
    out_.flush();
    if (!out_)
        throw ArchiveError("failed writing archive record " + std::to_string(r.index));
}

} // namespace pego
