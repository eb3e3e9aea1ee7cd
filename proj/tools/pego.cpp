#include <iostream>

#include <CLI11.hpp>

#include "pego/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"pego: batch-parallel efficient global optimization over mixed spaces"};
    app.require_subcommand(1);

    std::string manifest;
    bool force = false;
    auto* run = app.add_subcommand("run", "Start a run described by a manifest");
    run->add_option("--manifest", manifest, "Run manifest (JSON)")->required();
    run->add_flag("--force", force, "Overwrite an existing output archive");

    std::string archive;
    std::string resume_manifest;
    auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
    resume->add_option("--archive", archive, "Archive to continue")->required();
    resume->add_option("--manifest", resume_manifest, "Manifest overriding the one recorded in the archive");

    std::string report_archive;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Write the evaluation trace as CSV and print a summary");
    report->add_option("--archive", report_archive, "Archive to summarize")->required();
    report->add_option("--out", report_out, "CSV output path")->required();

    std::string bench_name;
    std::size_t trials = 20;
    pego::Seed seed = 1;
    pego::LoopConfig bench_cfg;
    bench_cfg.max_evaluations = 100;
    auto* bench = app.add_subcommand("benchmark", "Compare EGO against uniform random search on a builtin benchmark");
    bench->add_option("--name", bench_name, "Benchmark name")->required();
    bench->add_option("--trials", trials, "Number of paired trials")->capture_default_str();
    bench->add_option("--seed", seed, "Seed of the first trial")->capture_default_str();
    bench->add_option("--budget", bench_cfg.max_evaluations, "Evaluations per trial")->capture_default_str();
    bench->add_option("--q", bench_cfg.q, "Batch size")->capture_default_str();
    bench->add_option("--init-batches", bench_cfg.init_batches, "Initial LHS batches")->capture_default_str();

    std::string space_ref;
    auto* schema = app.add_subcommand("schema", "Print the schema of a space reference");
    schema->add_option("--space", space_ref, "allcnn:q=N, benchmark:NAME or a schema file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pego::kExitUsage;
    }

    if (*run)
        return pego::cmd_run(manifest, force, std::cout, std::cerr);
    if (*resume)
        return pego::cmd_resume(archive,
                                resume_manifest.empty() ? std::nullopt
                                                        : std::optional<std::filesystem::path>(resume_manifest),
                                std::cout, std::cerr);
    if (*report)
        return pego::cmd_report(report_archive, report_out, std::cout, std::cerr);
    if (*bench)
        return pego::cmd_benchmark(bench_name, trials, seed, bench_cfg, std::cout, std::cerr);
    return pego::cmd_schema(space_ref, std::cout, std::cerr);
}
