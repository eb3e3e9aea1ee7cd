#include "pego/evalproto.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <poll.h>
#include <set>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "pego/benchmarks.hpp"

extern char** environ;

namespace pego {

namespace {

constexpr std::size_t kMaxLineBytes = std::size_t{64} << 20;

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::uint64_t hash_id(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

// --- wire format -------------------------------------------------------------

json EvalRequest::to_json() const {
    json j{{"id", id}, {"config", config}};
    if (descriptor)
        j["descriptor"] = *descriptor;
    j["deadline"] = deadline ? json(*deadline) : json(nullptr);
    return j;
}

EvalRequest EvalRequest::from_json(const json& j) {
    EvalRequest r;
    r.id = j.at("id").get<std::string>();
    r.config = j.at("config");
    if (j.contains("descriptor") && !j.at("descriptor").is_null())
        r.descriptor = j.at("descriptor");
    if (j.contains("deadline") && !j.at("deadline").is_null())
        r.deadline = j.at("deadline").get<double>();
    return r;
}

json EvalResponse::to_json() const {
    json j{{"id", id}, {"status", ok() ? "ok" : "failed"}, {"diagnostics", diagnostics}};
    if (ok())
        j["metric"] = metric;
    return j;
}

EvalResponse EvalResponse::from_json(const json& j) {
    if (!j.is_object() || !j.contains("id") || !j.at("id").is_string())
        throw std::invalid_argument("response lacks a string id");
    if (!j.contains("status") || !j.at("status").is_string())
        throw std::invalid_argument("response lacks a status");
    EvalResponse r;
    r.id = j.at("id").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    if (status == "ok")
        r.status = EvalStatus::ok;
    else if (status == "failed")
        r.status = EvalStatus::failed;
    else
        throw std::invalid_argument("unknown response status '" + status + "'");
    if (j.contains("diagnostics") && !j.at("diagnostics").is_null()) {
        if (!j.at("diagnostics").is_object())
            throw std::invalid_argument("response diagnostics must be an object");
        r.diagnostics = j.at("diagnostics");
    }
    if (r.ok()) {
        if (!j.contains("metric") || !j.at("metric").is_number())
            throw std::invalid_argument("ok response lacks a numeric metric");
        r.metric = j.at("metric").get<double>();
        if (!std::isfinite(r.metric))
            throw std::invalid_argument("ok response has a non-finite metric");
    }
    return r;
}

EvalResponse EvalResponse::failure(std::string id, std::string error, bool transport) {
    EvalResponse r;
    r.id = std::move(id);
    r.status = EvalStatus::failed;
    r.diagnostics = json{{"error", std::move(error)}};
    r.transport_error = transport;
    return r;
}

json handshake_line() { return json{{"protocol", kProtocolName}, {"version", kProtocolVersion}}; }

// --- BenchmarkEvaluator ------------------------------------------------------

BenchmarkEvaluator::BenchmarkEvaluator(std::string name, std::size_t slots, Seed noise_seed)
    : name_(std::move(name)), slots_(std::max<std::size_t>(1, slots)), noise_seed_(noise_seed) {
    benchmark(name_); // throws for unknown names
}

const ParameterSpace& BenchmarkEvaluator::space() const { return benchmark(name_).space; }

EvalResponse BenchmarkEvaluator::evaluate(const EvalRequest& request, std::size_t) {
    try {
        const auto c = space().parse_configuration(request.config);
        EvalResponse r;
        r.id = request.id;
        r.status = EvalStatus::ok;
        r.metric = -builtin_benchmark(name_, c, derive_seed(noise_seed_, kStreamNoise, hash_id(request.id)));
        return r;
    } catch (const std::exception& e) {
        return EvalResponse::failure(request.id, e.what());
    }
}

// --- ChildProcess ------------------------------------------------------------

ChildProcess::ChildProcess(const std::vector<std::string>& argv, const std::map<std::string, std::string>& extra_env) {
    if (argv.empty())
        throw EvaluatorUnavailable("empty evaluator command");
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0)
        throw EvaluatorUnavailable(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw EvaluatorUnavailable(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<std::string> env_storage;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        const auto key = entry.substr(0, entry.find('='));
        if (!extra_env.count(key))
            env_storage.push_back(entry);
    }
    for (const auto& [k, v] : extra_env)
        env_storage.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& s : env_storage)
        envp.push_back(s.data());
    envp.push_back(nullptr);
    std::vector<std::string> args = argv;
    std::vector<char*> cargv;
    for (auto& a : args)
        cargv.push_back(a.data());
    cargv.push_back(nullptr);

    const int rc = posix_spawnp(&pid_, cargv[0], &actions, nullptr, cargv.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        pid_ = -1;
        throw EvaluatorUnavailable("cannot start evaluator '" + argv[0] + "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

ChildProcess::~ChildProcess() {
    if (pid_ <= 0)
        return;
    if (to_child_ >= 0)
        ::close(to_child_);
    to_child_ = -1;
    // Closing stdin asks the child to exit; give it a moment before killing.
    for (int i = 0; i < 50; ++i) {
        int status = 0;
        if (waitpid(pid_, &status, WNOHANG) == pid_) {
            pid_ = -1;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill();
}

void ChildProcess::kill() {
    if (to_child_ >= 0)
        ::close(to_child_);
    if (from_child_ >= 0)
        ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        int status = 0;
        waitpid(pid_, &status, 0);
    }
    pid_ = -1;
}

bool ChildProcess::write_line(const std::string& line) {
    if (to_child_ < 0)
        return false;
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

ChildProcess::ReadStatus ChildProcess::read_line(std::string& out,
                                                 std::optional<std::chrono::duration<double>> timeout) {
    using clock = std::chrono::steady_clock;
    const auto until = timeout ? std::optional(clock::now() + std::chrono::duration_cast<clock::duration>(*timeout))
                               : std::nullopt;
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            out = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!out.empty() && out.back() == '\r')
                out.pop_back();
            return ReadStatus::line;
        }
        if (from_child_ < 0 || buffer_.size() > kMaxLineBytes)
            return ReadStatus::closed;
        int wait_ms = -1;
        if (until) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*until - clock::now()).count();
            if (left <= 0)
                return ReadStatus::timeout;
            wait_ms = static_cast<int>(std::min<long long>(left, 1 << 30));
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, wait_ms);
        if (rc < 0) {
            if (errno == EINTR)
                continue;
            return ReadStatus::closed;
        }
        if (rc == 0)
            return ReadStatus::timeout;
        char chunk[65536];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            return ReadStatus::closed;
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

// --- SubprocessEndpoint ------------------------------------------------------

SubprocessEndpoint::SubprocessEndpoint(SubprocessOptions options, std::size_t slot)
    : options_(std::move(options)), slot_(slot) {
    if (options_.argv.empty())
        throw std::invalid_argument("subprocess evaluator needs a command");
    if (options_.max_attempts < 1)
        throw std::invalid_argument("max_attempts must be >= 1");
}

std::string SubprocessEndpoint::start_child() {
    child_ = std::make_unique<ChildProcess>(options_.argv,
                                            std::map<std::string, std::string>{{"PEGO_SLOT", std::to_string(slot_)}});
    std::string line;
    const auto st = child_->read_line(line, std::chrono::duration<double>(options_.handshake_timeout));
    std::string problem;
    if (st == ChildProcess::ReadStatus::timeout) {
        problem = "no handshake within " + std::to_string(options_.handshake_timeout) + " s";
    } else if (st == ChildProcess::ReadStatus::closed) {
        problem = "evaluator exited before its handshake";
    } else {
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || j.value("protocol", "") != kProtocolName)
            problem = "bad handshake line: " + line.substr(0, 200);
        else if (j.value("version", -1) != kProtocolVersion)
            problem = "unsupported protocol version " + j.value("version", json()).dump();
    }
    if (!problem.empty())
        child_.reset();
    return problem;
}

void SubprocessEndpoint::ensure_started() {
    if (child_)
        return;
    if (auto problem = start_child(); !problem.empty())
        throw EvaluatorUnavailable(problem);
}

void SubprocessEndpoint::stop() { child_.reset(); }

EvalResponse SubprocessEndpoint::dispatch(const EvalRequest& request) {
    const auto deadline = request.deadline ? request.deadline : options_.default_deadline;
    std::string last_problem = "no attempt made";
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
        if (!child_) {
            try {
                last_problem = start_child();
            } catch (const EvaluatorUnavailable& e) {
                last_problem = e.what();
            }
            if (!child_)
                continue;
        }
        EvalRequest wire = request;
        wire.deadline = deadline;
        if (!child_->write_line(wire.to_json().dump())) {
            last_problem = "evaluator closed its input";
            child_.reset();
            continue;
        }
        using clock = std::chrono::steady_clock;
        const auto start = clock::now();
        for (;;) {
            std::optional<std::chrono::duration<double>> left;
            if (deadline)
                left = std::chrono::duration<double>(*deadline) - (clock::now() - start);
            std::string line;
            const auto st = (left && left->count() <= 0) ? ChildProcess::ReadStatus::timeout
                                                         : child_->read_line(line, left);
            if (st == ChildProcess::ReadStatus::timeout) {
                child_->kill();
                child_.reset();
                auto r = EvalResponse::failure(request.id, "deadline");
                r.diagnostics["deadline"] = *deadline;
                return r;
            }
            if (st == ChildProcess::ReadStatus::closed) {
                last_problem = "evaluator exited";
                child_.reset();
                break;
            }
            try {
                auto r = EvalResponse::from_json(json::parse(line));
                if (r.id != request.id)
                    continue; // stale answer to an earlier request
                return r;
            } catch (const std::exception& e) {
                last_problem = std::string("malformed response: ") + e.what();
                child_->kill();
                child_.reset();
                break;
            }
        }
    }
    auto r = EvalResponse::failure(request.id, "transport", true);
    r.diagnostics["detail"] = last_problem;
    r.diagnostics["attempts"] = options_.max_attempts;
    return r;
}

std::vector<EvalResponse> SubprocessEndpoint::dispatch_pipelined(std::span<const EvalRequest> requests) {
    std::vector<EvalResponse> out(requests.size());
    std::vector<bool> done(requests.size(), false);
    std::map<std::string, std::size_t> pending;
    for (std::size_t i = 0; i < requests.size(); ++i)
        pending[requests[i].id] = i;
    if (pending.size() != requests.size())
        throw std::invalid_argument("pipelined requests need unique ids");

    std::optional<double> total_deadline = 0.0;
    for (const auto& r : requests) {
        const auto d = r.deadline ? r.deadline : options_.default_deadline;
        if (!d) {
            total_deadline.reset();
            break;
        }
        *total_deadline += *d;
    }

    bool fault = false;
    try {
        ensure_started();
    } catch (const EvaluatorUnavailable&) {
        fault = true;
    }
    for (std::size_t i = 0; i < requests.size() && !fault; ++i)
        fault = !child_->write_line(requests[i].to_json().dump());

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    while (!fault && !pending.empty()) {
        std::optional<std::chrono::duration<double>> left;
        if (total_deadline) {
            left = std::chrono::duration<double>(*total_deadline) - (clock::now() - start);
            if (left->count() <= 0) {
                child_->kill();
                child_.reset();
                for (const auto& [id, i] : pending) {
                    out[i] = EvalResponse::failure(id, "deadline");
                    done[i] = true;
                }
                pending.clear();
                break;
            }
        }
        std::string line;
        const auto st = child_->read_line(line, left);
        if (st == ChildProcess::ReadStatus::timeout)
            continue;
        if (st == ChildProcess::ReadStatus::closed) {
            fault = true;
            break;
        }
        try {
            auto r = EvalResponse::from_json(json::parse(line));
            auto it = pending.find(r.id);
            if (it == pending.end())
                continue; // unknown or already answered id
            out[it->second] = std::move(r);
            done[it->second] = true;
            pending.erase(it);
        } catch (const std::exception&) {
            fault = true;
        }
    }
    if (fault) {
        if (child_)
            child_->kill();
        child_.reset();
        for (std::size_t i = 0; i < requests.size(); ++i)
            if (!done[i])
                out[i] = dispatch(requests[i]);
    }
    return out;
}

// --- SubprocessEvaluator -----------------------------------------------------

SubprocessEvaluator::SubprocessEvaluator(SubprocessOptions options, std::size_t slots) {
    for (std::size_t s = 0; s < std::max<std::size_t>(1, slots); ++s)
        endpoints_.push_back(std::make_unique<SubprocessEndpoint>(options, s));
}

void SubprocessEvaluator::start() {
    for (auto& e : endpoints_)
        e->ensure_started();
}

EvalResponse SubprocessEvaluator::evaluate(const EvalRequest& request, std::size_t slot) {
    return endpoints_.at(slot)->dispatch(request);
}

std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> out;
    std::string cur;
    bool have = false;
    char quote = 0;
    for (char ch : command) {
        if (quote) {
            if (ch == quote)
                quote = 0;
            else
                cur += ch;
        } else if (ch == '\'' || ch == '"') {
            quote = ch;
            have = true;
        } else if (std::isspace(static_cast<unsigned char>(ch))) {
            if (have || !cur.empty())
                out.push_back(cur);
            cur.clear();
            have = false;
        } else {
            cur += ch;
        }
    }
    if (quote)
        throw std::invalid_argument("unterminated quote in command line");
    if (have || !cur.empty())
        out.push_back(cur);
    return out;
}

} // namespace pego
