#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include "pego/benchmarks.hpp"
#include "pego/evalproto.hpp"
#include "support.hpp"

using namespace pego;

namespace {

SubprocessOptions fake(std::vector<std::string> args) {
    SubprocessOptions o;
    o.argv = {PEGO_FAKE_EVALUATOR};
    o.argv.insert(o.argv.end(), args.begin(), args.end());
    o.handshake_timeout = 10;
    return o;
}

EvalRequest request(const std::string& id) {
    EvalRequest r;
    r.id = id;
    r.config = json{{"x", 1.0}};
    return r;
}

} // namespace

TEST_CASE("wire format round trip") {
    EvalRequest r = request("e3");
    r.deadline = 5.0;
    r.descriptor = json{{"version", 1}};
    const auto j = r.to_json();
    CHECK(j.at("id") == "e3");
    CHECK(j.at("deadline") == 5.0);
    const auto back = EvalRequest::from_json(j);
    CHECK(back.id == "e3");
    CHECK(back.descriptor == r.descriptor);
    CHECK(request("a").to_json().at("deadline").is_null());

    EvalResponse ok;
    ok.id = "e3";
    ok.status = EvalStatus::ok;
    ok.metric = 0.5;
    CHECK(EvalResponse::from_json(ok.to_json()).metric == 0.5);
    CHECK(EvalResponse::failure("e1", "boom").to_json().at("status") == "failed");
    CHECK_FALSE(EvalResponse::failure("e1", "boom").to_json().contains("transport_error"));

    CHECK_THROWS_AS(EvalResponse::from_json(json{{"id", "a"}, {"status", "ok"}}), std::invalid_argument);
    CHECK_THROWS_AS(EvalResponse::from_json(json{{"id", "a"}, {"status", "maybe"}}), std::invalid_argument);
    CHECK_THROWS_AS(EvalResponse::from_json(json{{"status", "ok"}, {"metric", 1}}), std::invalid_argument);
    CHECK(handshake_line() == json{{"protocol", "pego-eval"}, {"version", 1}});
}

TEST_CASE("echo evaluator returns its metric") {
    SubprocessEndpoint e(fake({"echo"}), 0);
    const auto r = e.dispatch(request("e0"));
    CHECK(r.ok());
    CHECK(r.id == "e0");
    CHECK(r.metric == 0.5);
    CHECK(e.dispatch(request("e1")).metric == 0.5); // the child is reused
}

TEST_CASE("malformed output three times fails with a transport error") {
    SubprocessEndpoint e(fake({"malformed"}), 0);
    const auto r = e.dispatch(request("e0"));
    CHECK_FALSE(r.ok());
    CHECK(r.transport_error);
    CHECK(r.diagnostics.at("error") == "transport");
    CHECK(r.diagnostics.at("attempts") == 3);
}

TEST_CASE("deadline kills a slow child") {
    auto o = fake({"sleep", "10"});
    SubprocessEndpoint e(o, 0);
    auto req = request("e0");
    req.deadline = 1.0;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = e.dispatch(req);
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK_FALSE(r.ok());
    CHECK_FALSE(r.transport_error);
    CHECK(r.diagnostics.at("error") == "deadline");
    CHECK(took < 5.0);
}

TEST_CASE("a crashing child is restarted") {
    testing_support::TempDir dir;
    SubprocessEndpoint e(fake({"crash-once", (dir / "marker").string()}), 0);
    const auto r = e.dispatch(request("e0"));
    CHECK(r.ok());
    CHECK(r.metric == 0.25);

    SubprocessEndpoint always(fake({"crash"}), 0);
    const auto f = always.dispatch(request("e0"));
    CHECK(f.transport_error);
}

TEST_CASE("replies with foreign ids are skipped") {
    SubprocessEndpoint e(fake({"stale"}), 0);
    const auto r = e.dispatch(request("e7"));
    CHECK(r.ok());
    CHECK(r.id == "e7");
    CHECK(r.metric == 0.75);
}

TEST_CASE("pipelined responses are matched by id") {
    SubprocessEndpoint e(fake({"reverse", "4"}), 0);
    std::vector<EvalRequest> reqs;
    for (int i = 0; i < 4; ++i)
        reqs.push_back(request("e" + std::to_string(i)));
    const auto out = e.dispatch_pipelined(reqs);
    REQUIRE(out.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(out[i].id == "e" + std::to_string(i));
        CHECK(out[i].metric == static_cast<double>(i));
    }
}

TEST_CASE("startup failures are reported") {
    SubprocessOptions missing;
    missing.argv = {"/nonexistent/evaluator-binary"};
    SubprocessEvaluator a(missing, 2);
    CHECK_THROWS_AS(a.start(), EvaluatorUnavailable);

    auto silent = fake({"silent"});
    silent.handshake_timeout = 0.5;
    SubprocessEvaluator b(silent, 1);
    CHECK_THROWS_AS(b.start(), EvaluatorUnavailable);

    SubprocessEvaluator c(fake({"bad-version"}), 1);
    CHECK_THROWS_AS(c.start(), EvaluatorUnavailable);
}

TEST_CASE("each slot gets its own child and slot index") {
    testing_support::TempDir dir;
    const auto log = dir / "requests.log";
    setenv("FAKE_EVALUATOR_LOG", log.c_str(), 1);
    SubprocessEvaluator ev(fake({"echo", "0.125"}), 3);
    ev.start();
    std::vector<std::jthread> threads;
    std::vector<EvalResponse> out(3);
    for (std::size_t s = 0; s < 3; ++s)
        threads.emplace_back([&, s] { out[s] = ev.evaluate(request("e" + std::to_string(s)), s); });
    threads.clear();
    unsetenv("FAKE_EVALUATOR_LOG");
    for (const auto& r : out)
        CHECK(r.metric == 0.125);
    const auto text = testing_support::read_file(log);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("builtin benchmark evaluator negates the value") {
    BenchmarkEvaluator ev("mixed_quadratic", 2);
    const auto& b = benchmark("mixed_quadratic");
    EvalRequest r;
    r.id = "e0";
    r.config = b.optimum.to_json();
    auto resp = ev.evaluate(r, 0);
    CHECK(resp.ok());
    CHECK(resp.metric == 0.0);
    auto c = b.optimum;
    c.set("i_a", std::int64_t{7});
    r.config = c.to_json();
    CHECK(ev.evaluate(r, 1).metric == -4.0);
    r.config = json{{"nope", 1}};
    CHECK_FALSE(ev.evaluate(r, 0).ok());
    CHECK_THROWS_AS(BenchmarkEvaluator("nope", 1), std::invalid_argument);
}

TEST_CASE("split_command honours quotes") {
    CHECK(split_command("python -m cnn_trainer serve") ==
          std::vector<std::string>{"python", "-m", "cnn_trainer", "serve"});
    CHECK(split_command("run 'a b' \"c d\"  e") == std::vector<std::string>{"run", "a b", "c d", "e"});
    CHECK(split_command("   ").empty());
}
