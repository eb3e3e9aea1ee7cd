#include <doctest.h>

#include "pego/archive.hpp"
#include "pego/benchmarks.hpp"
#include "support.hpp"

using namespace pego;
using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

EvaluationRecord record(const Configuration& c, double fitness, bool failed = false) {
    EvaluationRecord r;
    r.config = c;
    r.fitness = fitness;
    r.failed = failed;
    if (!failed)
        r.raw_metric = -fitness;
    else
        r.error = "boom";
    r.wall_time = 0.25;
    return r;
}

} // namespace

TEST_CASE("append assigns indices and tracks the incumbent") {
    const auto& b = benchmark("mixed_quadratic");
    Archive a(b.space);
    CHECK_FALSE(a.y_min().has_value());
    CHECK(a.append(record(b.optimum, 3.0)).index == 0);
    a.append(record(b.optimum, 5.0, true));
    a.append(record(b.optimum, 1.0));
    a.append(record(b.optimum, 2.0));
    CHECK(a.size() == 4);
    CHECK(a[3].index == 3);
    CHECK(*a.y_min() == 1.0);
    CHECK(*a.y_worst() == 3.0);
    CHECK(a.best()->index == 2);
    CHECK(a.prefix(2).size() == 2);
    CHECK(*a.prefix(1).y_worst() == 3.0);

    auto bad = b.optimum;
    bad.set("i_a", std::int64_t{99});
    CHECK_THROWS_AS(a.append(record(bad, 0.0)), InvalidConfiguration);
}

TEST_CASE("failed records never become the incumbent") {
    const auto& b = benchmark("mixed_quadratic");
    Archive a(b.space);
    a.append(record(b.optimum, -10.0, true));
    CHECK_FALSE(a.best());
    a.append(record(b.optimum, 4.0));
    CHECK(*a.y_min() == 4.0);
}

TEST_CASE("file round trip") {
    TempDir dir;
    const auto& b = benchmark("mixed_multimodal");
    const auto path = dir / "run.jsonl";
    ArchiveHeader h{b.space, json{{"seed", 5}}, json{{"note", "x"}}};
    auto w = ArchiveWriter::create(path, h);
    Archive a(b.space);
    auto r = record(b.optimum, 0.5);
    r.temperature = 1.7;
    r.iteration = 6;
    w.write(a.append(r));
    w.write(a.append(record(b.optimum, 1.5, true)));

    const auto loaded = load_archive(path);
    CHECK(loaded.header.space == b.space);
    CHECK(loaded.header.loop == json{{"seed", 5}});
    CHECK(loaded.header.run.at("note") == "x");
    REQUIRE(loaded.archive.size() == 2);
    CHECK(loaded.archive.records() == a.records());
    CHECK(loaded.archive[1].error == "boom");

    // One line per record plus the header.
    const auto text = read_file(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);

    auto more = ArchiveWriter::append_to(path);
    more.write(a.append(record(b.optimum, 0.25)));
    CHECK(load_archive(path).archive.size() == 3);
}

TEST_CASE("truncated and corrupt files name the last valid record") {
    TempDir dir;
    const auto& b = benchmark("mixed_quadratic");
    const auto path = dir / "run.jsonl";
    {
        auto w = ArchiveWriter::create(path, ArchiveHeader{b.space, json::object(), json::object()});
        Archive a(b.space);
        for (int i = 0; i < 3; ++i)
            w.write(a.append(record(b.optimum, i)));
    }
    const auto full = read_file(path);

    auto expect_error = [&](const std::string& text, const std::string& fragment) {
        write_file(path, text);
        try {
            load_archive(path);
            FAIL("accepted a damaged archive");
        } catch (const ArchiveError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
        }
    };
    expect_error(full.substr(0, full.size() - 10), "last valid record is index 1");
    auto lines = full;
    const auto third = lines.find('\n', lines.find('\n', lines.find('\n') + 1) + 1);
    lines.insert(third + 1, "{not json}\n");
    expect_error(lines, "corrupt at line 4");
    expect_error(lines, "last valid record is index 1");
    expect_error("", "empty");
    expect_error("{\"format\":\"other\"}\n", "invalid header");

    auto gap = full;
    const auto pos = gap.find("\"index\":1");
    gap.replace(pos, 9, "\"index\":7");
    expect_error(gap, "out of sequence");

    auto invalid = full;
    const auto ia = invalid.find("\"i_a\":5");
    invalid.replace(ia, 7, "\"i_a\":55");
    expect_error(invalid, "i_a out of range");
}

TEST_CASE("record validation on load") {
    const auto& b = benchmark("mixed_quadratic");
    auto j = record(b.optimum, 1.0).to_json();
    CHECK(EvaluationRecord::from_json(b.space, j) == record(b.optimum, 1.0));
    j["status"] = "weird";
    CHECK_THROWS_AS(EvaluationRecord::from_json(b.space, j), std::invalid_argument);
    auto k = record(b.optimum, 1.0).to_json();
    k["raw_metric"] = nullptr;
    CHECK_THROWS_AS(EvaluationRecord::from_json(b.space, k), std::invalid_argument);
}
