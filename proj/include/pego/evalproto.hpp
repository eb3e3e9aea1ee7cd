#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <sys/types.h>
#include <vector>

#include "pego/seed.hpp"
#include "pego/space.hpp"

namespace pego {

inline constexpr const char* kProtocolName = "pego-eval";
inline constexpr int kProtocolVersion = 1;

struct EvalRequest {
    std::string id;
    json config = json::object();
    std::optional<json> descriptor;
    std::optional<double> deadline; // seconds

    json to_json() const;
    static EvalRequest from_json(const json& j);
};

enum class EvalStatus { ok, failed };

struct EvalResponse {
    std::string id;
    EvalStatus status = EvalStatus::failed;
    double metric = 0.0; // higher is better; meaningful when ok
    json diagnostics = json::object();
    /// Set locally when the evaluator could not be reached or kept
    /// answering garbage; never part of the wire format.
    bool transport_error = false;

    bool ok() const noexcept { return status == EvalStatus::ok; }
    json to_json() const;
    /// Throws std::invalid_argument on missing fields, an unknown status,
    /// or an ok response without a finite metric.
    static EvalResponse from_json(const json& j);

    static EvalResponse failure(std::string id, std::string error, bool transport = false);
};

json handshake_line();

/// Evaluation backend used by the optimization loop. `evaluate` may be
/// called concurrently for distinct slots; each slot is used by at most one
/// thread at a time.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual std::size_t slots() const = 0;
    /// Brings up whatever the evaluator needs (child processes). Throws
    /// EvaluatorUnavailable when that is impossible.
    virtual void start() {}
    virtual EvalResponse evaluate(const EvalRequest& request, std::size_t slot) = 0;
};

class EvaluatorUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// In-process evaluator for a builtin benchmark; reports the negated
/// benchmark value so that higher is better at the protocol boundary.
class BenchmarkEvaluator final : public Evaluator {
public:
    BenchmarkEvaluator(std::string name, std::size_t slots, Seed noise_seed = 0);
    std::size_t slots() const override { return slots_; }
    EvalResponse evaluate(const EvalRequest& request, std::size_t slot) override;
    const ParameterSpace& space() const;

private:
    std::string name_;
    std::size_t slots_;
    Seed noise_seed_;
};

/// One child process speaking the line protocol on its stdin/stdout.
class ChildProcess {
public:
    ChildProcess(const std::vector<std::string>& argv, const std::map<std::string, std::string>& extra_env);
    ~ChildProcess();
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    enum class ReadStatus { line, timeout, closed };

    bool write_line(const std::string& line);
    /// Reads one line, waiting at most `timeout` (forever when empty).
    ReadStatus read_line(std::string& out, std::optional<std::chrono::duration<double>> timeout);
    void kill();
    pid_t pid() const noexcept { return pid_; }

private:
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

struct SubprocessOptions {
    std::vector<std::string> argv;
    std::optional<double> default_deadline;
    double handshake_timeout = 120.0;
    int max_attempts = 3;
};

/// Protocol client bound to one child process, restarted on demand.
class SubprocessEndpoint {
public:
    SubprocessEndpoint(SubprocessOptions options, std::size_t slot);

    /// Spawns the child and checks its version handshake if not running.
    void ensure_started();

    /// Sends one request and waits for the response carrying its id.
    /// Malformed output or a dying child is retried with a fresh child up to
    /// max_attempts times in total before a transport failure is returned.
    /// A missed deadline kills the child and fails the request ("deadline").
    EvalResponse dispatch(const EvalRequest& request);

    /// Writes all requests before reading; responses are matched by id in
    /// whatever order they arrive. Requests left unanswered after a protocol
    /// fault fall back to dispatch().
    std::vector<EvalResponse> dispatch_pipelined(std::span<const EvalRequest> requests);

    void stop();

private:
    std::string start_child();

    SubprocessOptions options_;
    std::size_t slot_;
    std::unique_ptr<ChildProcess> child_;
};

class SubprocessEvaluator final : public Evaluator {
public:
    SubprocessEvaluator(SubprocessOptions options, std::size_t slots);
    std::size_t slots() const override { return endpoints_.size(); }
    void start() override;
    EvalResponse evaluate(const EvalRequest& request, std::size_t slot) override;

private:
    std::vector<std::unique_ptr<SubprocessEndpoint>> endpoints_;
};

/// Splits a command line on whitespace; single and double quotes group.
std::vector<std::string> split_command(const std::string& command);

} // namespace pego
