#include "pego/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

#include "pego/benchmarks.hpp"
#include "pego/sampler.hpp"

namespace pego {

namespace fs = std::filesystem;

namespace {

std::string format_number(double x) { return json(x).dump(); }

fs::path resolve_path(const fs::path& p, const fs::path& base) { return p.is_absolute() ? p : base / p; }

std::size_t parse_count(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty() || s[0] == '-')
        throw std::invalid_argument("invalid " + what + " '" + s + "'");
    return static_cast<std::size_t>(v);
}

EvaluatorSpec parse_evaluator(const json& j) {
    EvaluatorSpec e;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s.rfind("builtin:", 0) == 0)
            e.builtin = s.substr(8);
        else
            e.command = split_command(s);
    } else if (j.is_object()) {
        for (const auto& [key, _] : j.items())
            if (key != "builtin" && key != "command" && key != "deadline" && key != "handshake_timeout" &&
                key != "noise_seed")
                throw std::invalid_argument("evaluator has unknown field '" + key + "'");
        const bool has_builtin = j.contains("builtin");
        const bool has_command = j.contains("command");
        if (has_builtin == has_command)
            throw std::invalid_argument("evaluator needs exactly one of 'builtin' or 'command'");
        if (has_builtin)
            e.builtin = j.at("builtin").get<std::string>();
        if (has_command) {
            const auto& c = j.at("command");
            e.command = c.is_array() ? c.get<std::vector<std::string>>() : split_command(c.get<std::string>());
        }
        if (j.contains("deadline") && !j.at("deadline").is_null())
            e.deadline = j.at("deadline").get<double>();
        e.handshake_timeout = j.value("handshake_timeout", e.handshake_timeout);
        e.noise_seed = j.value("noise_seed", e.noise_seed);
    } else {
        throw std::invalid_argument("evaluator must be a string or an object");
    }
    if (e.builtin)
        benchmark(*e.builtin); // throws for unknown names
    else if (e.command.empty())
        throw std::invalid_argument("evaluator command is empty");
    if (e.deadline && !(*e.deadline > 0))
        throw std::invalid_argument("evaluator deadline must be positive");
    if (!(e.handshake_timeout > 0))
        throw std::invalid_argument("evaluator handshake_timeout must be positive");
    return e;
}

bool is_allcnn(const ParameterSpace& s) { return allcnn::stacks_of(s).has_value(); }

void print_progress(std::ostream& out, std::size_t iteration, const Archive& a) {
    out << "iteration " << iteration << "  evaluations " << a.size();
    if (const auto* b = a.best())
        out << "  best_fitness " << format_number(b->fitness) << "  best_metric " << format_number(*b->raw_metric);
    else
        out << "  best_fitness none";
    out << '\n' << std::flush;
}

void print_done(std::ostream& out, const Archive& a, const fs::path& path) {
    out << "finished " << a.size() << " evaluations";
    if (const auto* b = a.best())
        out << "; best index " << b->index << " fitness " << format_number(b->fitness);
    out << "; archive " << path.string() << '\n';
}

} // namespace

json EvaluatorSpec::to_json() const {
    json j = json::object();
    if (builtin) {
        j["builtin"] = *builtin;
        j["noise_seed"] = noise_seed;
    } else {
        j["command"] = command;
        j["handshake_timeout"] = handshake_timeout;
    }
    j["deadline"] = deadline ? json(*deadline) : json(nullptr);
    return j;
}

ParameterSpace resolve_space(const std::string& ref, const fs::path& base_dir) {
    if (ref.rfind("allcnn:", 0) == 0) {
        const auto arg = ref.substr(7);
        if (arg.rfind("q=", 0) != 0)
            throw std::invalid_argument("space '" + ref + "': expected allcnn:q=N");
        const auto q = parse_count(arg.substr(2), "stack count");
        if (q < 1)
            throw std::invalid_argument("space '" + ref + "': need at least one stack");
        return allcnn::space(q);
    }
    if (ref.rfind("benchmark:", 0) == 0)
        return benchmark(ref.substr(10)).space;
    const auto path = resolve_path(ref, base_dir);
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot read space schema " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("space schema " + path.string() + " is not JSON: " + e.what());
    }
    return ParameterSpace::from_json(j);
}

RunManifest RunManifest::from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object())
        throw std::invalid_argument("manifest must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "space" && key != "evaluator" && key != "loop" && key != "slots" && key != "classes" &&
            key != "training" && key != "output")
            throw std::invalid_argument("manifest has unknown field '" + key + "'");
    RunManifest m;
    m.base_dir = base_dir;
    if (!j.contains("evaluator"))
        throw std::invalid_argument("manifest lacks 'evaluator'");
    m.evaluator = parse_evaluator(j.at("evaluator"));

    if (j.contains("space")) {
        const auto& s = j.at("space");
        if (s.is_string()) {
            m.space_ref = s.get<std::string>();
            m.space = resolve_space(m.space_ref, base_dir);
        } else {
            m.space = ParameterSpace::from_json(s);
        }
    } else if (m.evaluator.builtin) {
        m.space_ref = "benchmark:" + *m.evaluator.builtin;
        m.space = benchmark(*m.evaluator.builtin).space;
    } else {
        throw std::invalid_argument("manifest lacks 'space'");
    }
    if (m.evaluator.builtin && m.space != benchmark(*m.evaluator.builtin).space)
        throw std::invalid_argument("space does not match builtin benchmark '" + *m.evaluator.builtin + "'");

    m.loop = LoopConfig::from_json(j.value("loop", json::object()));
    if (j.contains("slots") && !j.at("slots").is_null()) {
        m.slots = j.at("slots").get<std::size_t>();
        if (*m.slots < 1)
            throw std::invalid_argument("slots must be >= 1");
    }
    m.classes = j.value("classes", m.classes);
    if (m.classes < 1)
        throw std::invalid_argument("classes must be >= 1");
    m.training = allcnn::TrainingOverrides::from_json(j.value("training", json::object()));
    if (!j.contains("output"))
        throw std::invalid_argument("manifest lacks 'output'");
    m.output = resolve_path(j.at("output").get<std::string>(), base_dir);
    if (!m.evaluator.command.empty()) {
        // A relative program path names a file next to the manifest.
        const fs::path program = m.evaluator.command.front();
        if (program.has_parent_path() && program.is_relative())
            m.evaluator.command.front() = (base_dir / program).string();
    }
    return m;
}

RunManifest RunManifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot read manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("manifest " + path.string() + " is not JSON: " + e.what());
    }
    auto dir = fs::absolute(path).parent_path();
    return from_json(j, dir);
}

json RunManifest::to_json() const {
    json j{{"evaluator", evaluator.to_json()},
           {"loop", loop.to_json()},
           {"slots", slots ? json(*slots) : json(nullptr)},
           {"classes", classes},
           {"training", training.to_json()},
           {"output", output.string()}};
    j["space"] = space_ref.empty() ? space.to_json() : json(space_ref);
    return j;
}

std::size_t resolve_slots(const RunManifest& m) {
    if (m.slots)
        return *m.slots;
    if (const char* env = std::getenv(kSlotsEnv); env && *env) {
        const auto n = parse_count(env, std::string(kSlotsEnv) + " value");
        if (n < 1)
            throw std::invalid_argument(std::string(kSlotsEnv) + " must be >= 1");
        return n;
    }
    return m.loop.q;
}

std::unique_ptr<Evaluator> make_evaluator(const RunManifest& m) {
    const auto slots = resolve_slots(m);
    if (m.evaluator.builtin)
        return std::make_unique<BenchmarkEvaluator>(*m.evaluator.builtin, slots, m.evaluator.noise_seed);
    SubprocessOptions o;
    o.argv = m.evaluator.command;
    o.default_deadline = m.evaluator.deadline;
    o.handshake_timeout = m.evaluator.handshake_timeout;
    return std::make_unique<SubprocessEvaluator>(std::move(o), slots);
}

RunOptions make_run_options(const RunManifest& m) {
    RunOptions o;
    o.archive_path = m.output;
    o.deadline = m.evaluator.deadline;
    o.run_info = json{{"manifest", m.to_json()}, {"base_dir", m.base_dir.string()}};
    if (is_allcnn(m.space)) {
        const auto classes = m.classes;
        const auto training = m.training;
        o.hooks.descriptor = [classes, training](const Configuration& c) -> std::optional<json> {
            return allcnn::descriptor_to_json(allcnn::to_descriptor(c, classes, training));
        };
    }
    return o;
}

int cmd_run(const fs::path& manifest_path, bool force, std::ostream& out, std::ostream& err) {
    RunManifest m;
    try {
        m = RunManifest::load(manifest_path);
    } catch (const std::exception& e) {
        err << "pego run: invalid manifest: " << e.what() << '\n';
        return kExitUsage;
    }
    if (fs::exists(m.output) && !force) {
        err << "pego run: " << m.output.string() << " already exists (use --force to overwrite)\n";
        return kExitUsage;
    }
    try {
        auto evaluator = make_evaluator(m);
        auto options = make_run_options(m);
        options.hooks.on_batch = [&](std::size_t it, const Archive& a) { print_progress(out, it, a); };
        const auto archive = run(m.space, *evaluator, m.loop, options);
        print_done(out, archive, m.output);
        return kExitOk;
    } catch (const EvaluatorUnavailable& e) {
        err << "pego run: evaluator unavailable: " << e.what() << '\n';
    } catch (const RunAborted& e) {
        err << "pego run: aborted: " << e.what() << "; partial archive with " << e.partial().size()
            << " records kept at " << m.output.string() << '\n';
    } catch (const std::exception& e) {
        err << "pego run: " << e.what() << '\n';
    }
    return kExitFailure;
}

int cmd_resume(const fs::path& archive_path, const std::optional<fs::path>& manifest_path, std::ostream& out,
               std::ostream& err) {
    LoadedArchive loaded;
    try {
        loaded = load_archive(archive_path);
    } catch (const std::exception& e) {
        err << "pego resume: " << e.what() << '\n';
        return kExitFailure;
    }
    RunManifest m;
    try {
        if (manifest_path) {
            m = RunManifest::load(*manifest_path);
        } else {
            if (!loaded.header.run.contains("manifest"))
                throw std::invalid_argument("archive header does not record its manifest; pass --manifest");
            auto mj = loaded.header.run.at("manifest");
            mj["space"] = loaded.header.space.to_json();
            m = RunManifest::from_json(mj, loaded.header.run.value("base_dir", std::string(".")));
        }
        m.output = archive_path;
    } catch (const std::exception& e) {
        err << "pego resume: invalid manifest: " << e.what() << '\n';
        return kExitUsage;
    }
    if (manifest_path && m.space != loaded.header.space) {
        err << "pego resume: archive " << archive_path.string() << " was produced for a different space\n";
        return kExitUsage;
    }
    try {
        auto evaluator = make_evaluator(m);
        auto options = make_run_options(m);
        options.hooks.on_batch = [&](std::size_t it, const Archive& a) { print_progress(out, it, a); };
        const auto archive = resume(archive_path, *evaluator, options, &m.space);
        print_done(out, archive, archive_path);
        return kExitOk;
    } catch (const EvaluatorUnavailable& e) {
        err << "pego resume: evaluator unavailable: " << e.what() << '\n';
    } catch (const RunAborted& e) {
        err << "pego resume: aborted: " << e.what() << "; archive holds " << e.partial().size() << " records\n";
    } catch (const std::exception& e) {
        err << "pego resume: " << e.what() << '\n';
    }
    return kExitFailure;
}

json write_report(const Archive& archive, std::ostream& csv) {
    if (archive.empty())
        throw std::invalid_argument("archive has no records");
    constexpr std::size_t window = 20;
    csv << "index,iteration,temperature,status,raw_metric,fitness,best_fitness,moving_average_20\n";
    std::optional<double> best;
    std::optional<double> last_average;
    std::size_t failed = 0;
    const auto& records = archive.records();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.failed)
            ++failed;
        else if (!best || r.fitness < *best)
            best = r.fitness;
        std::optional<double> average;
        if (i + 1 >= window) {
            double sum = 0;
            std::size_t n = 0;
            for (std::size_t k = i + 1 - window; k <= i; ++k)
                if (records[k].raw_metric) {
                    sum += *records[k].raw_metric;
                    ++n;
                }
            if (n > 0)
                average = sum / static_cast<double>(n);
            last_average = average;
        }
        csv << r.index << ',' << r.iteration << ',' << (r.temperature ? format_number(*r.temperature) : "") << ','
            << (r.failed ? "failed" : "ok") << ',' << (r.raw_metric ? format_number(*r.raw_metric) : "") << ','
            << format_number(r.fitness) << ',' << (best ? format_number(*best) : "") << ','
            << (average ? format_number(*average) : "") << '\n';
    }
    json summary{{"records", records.size()}, {"failed", failed}};
    if (const auto* b = archive.best())
        summary["best"] = json{{"index", b->index},
                               {"iteration", b->iteration},
                               {"fitness", b->fitness},
                               {"raw_metric", *b->raw_metric},
                               {"config", b->config.to_json()}};
    else
        summary["best"] = nullptr;
    summary["moving_average_20"] = last_average ? json(*last_average) : json(nullptr);
    return summary;
}

int cmd_report(const fs::path& archive_path, const fs::path& csv_out, std::ostream& out, std::ostream& err) {
    std::error_code ec;
    if (fs::exists(csv_out) && fs::equivalent(archive_path, csv_out, ec)) {
        err << "pego report: refusing to overwrite the archive with the report\n";
        return kExitUsage;
    }
    LoadedArchive loaded;
    try {
        loaded = load_archive(archive_path);
    } catch (const std::exception& e) {
        err << "pego report: " << e.what() << '\n';
        return kExitFailure;
    }
    if (loaded.archive.empty()) {
        err << "pego report: archive " << archive_path.string() << " has no records\n";
        return kExitFailure;
    }
    std::ofstream csv(csv_out, std::ios::trunc);
    if (!csv) {
        err << "pego report: cannot write " << csv_out.string() << '\n';
        return kExitFailure;
    }
    const auto summary = write_report(loaded.archive, csv);
    csv.close();
    if (!csv) {
        err << "pego report: failed writing " << csv_out.string() << '\n';
        return kExitFailure;
    }
    out << summary.dump(2) << '\n';
    return kExitOk;
}

json BenchmarkComparison::to_json() const {
    json t = json::array();
    for (const auto& tr : trials)
        t.push_back({{"seed", tr.seed}, {"ego_best", tr.ego_best}, {"random_best", tr.random_best}});
    return json{{"benchmark", name},
                {"trials", t},
                {"wins", wins},
                {"losses", losses},
                {"ties", trials.size() - wins - losses},
                {"sign_test_p", sign_test_p}};
}

double sign_test_p_value(std::size_t wins, std::size_t losses) {
    const auto n = wins + losses;
    if (n == 0)
        return 1.0;
    double p = 0;
    for (std::size_t k = wins; k <= n; ++k)
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                      static_cast<double>(n) * std::log(2.0));
    return std::min(p, 1.0);
}

BenchmarkComparison compare_with_random_search(const std::string& name, std::size_t trials, Seed base_seed,
                                               const LoopConfig& cfg) {
    const auto& b = benchmark(name);
    BenchmarkComparison cmp;
    cmp.name = name;
    for (std::size_t i = 0; i < trials; ++i) {
        ComparisonTrial tr;
        tr.seed = base_seed + i;

        auto c = cfg;
        c.seed = tr.seed;
        c.record_wall_time = false;
        BenchmarkEvaluator evaluator(name, c.q, tr.seed);
        const auto archive = run(b.space, evaluator, c);
        tr.ego_best = archive.best()->fitness;

        std::mt19937_64 rng(derive_seed(tr.seed, kStreamRandomSearch));
        tr.random_best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < cfg.max_evaluations; ++k)
            tr.random_best = std::min(tr.random_best, builtin_benchmark(name, uniform_sample(b.space, rng), tr.seed));

        if (tr.ego_best < tr.random_best)
            ++cmp.wins;
        else if (tr.random_best < tr.ego_best)
            ++cmp.losses;
        cmp.trials.push_back(tr);
    }
    cmp.sign_test_p = sign_test_p_value(cmp.wins, cmp.losses);
    return cmp;
}

int cmd_benchmark(const std::string& name, std::size_t trials, Seed seed, const LoopConfig& cfg, std::ostream& out,
                  std::ostream& err) {
    try {
        benchmark(name);
        cfg.check();
        if (trials < 1)
            throw std::invalid_argument("need at least one trial");
    } catch (const std::exception& e) {
        err << "pego benchmark: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        const auto cmp = compare_with_random_search(name, trials, seed, cfg);
        out << cmp.to_json().dump(2) << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "pego benchmark: " << e.what() << '\n';
        return kExitFailure;
    }
}

int cmd_schema(const std::string& space_ref, std::ostream& out, std::ostream& err) {
    try {
        out << resolve_space(space_ref, fs::current_path()).to_json().dump(2) << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "pego schema: " << e.what() << '\n';
        return kExitUsage;
    }
}

} // namespace pego
