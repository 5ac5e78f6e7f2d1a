#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rvlab/exp_harness.hpp"

namespace fs = std::filesystem;

namespace {

rvlab::ExperimentConfig load_with_overrides(const fs::path& path,
                                            std::optional<std::uint64_t> seed,
                                            std::optional<int> workers,
                                            std::optional<std::uint64_t> samples) {
    auto config = rvlab::load_config(path);
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;
    if (samples) config.samples = *samples;
    return config;
}

int run_one(const fs::path& config_path, std::optional<std::uint64_t> seed,
            std::optional<int> workers, std::optional<std::uint64_t> samples,
            const std::string& output_override) {
    const auto config = load_with_overrides(config_path, seed, workers, samples);
    std::cout << "running " << config.id << " (" << rvlab::experiment_kind_name(config.kind)
              << ", n=" << config.samples << ", seed=" << config.seed << ")" << std::endl;
    const auto record = rvlab::run_experiment(config);
    fs::path stem = output_override.empty() ? fs::path("out") / config.id
                                            : fs::path(output_override);
    const std::vector<rvlab::RunRecord> records{record};
    rvlab::emit_report(records, "json", stem);
    const auto rep = rvlab::emit_report(records, "csv", stem);
    std::cout << rep.summary;
    return record.pass ? 0 : 1;
}

int run_suite(const fs::path& dir, std::optional<std::uint64_t> seed, std::optional<int> workers,
              std::optional<std::uint64_t> samples, const std::string& output_override) {
    std::vector<fs::path> configs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") configs.push_back(entry.path());
    std::sort(configs.begin(), configs.end());
    if (configs.empty()) {
        std::cerr << "no .json configs under " << dir << std::endl;
        return 2;
    }
    std::vector<rvlab::RunRecord> records;
    for (const auto& path : configs) {
        const auto config = load_with_overrides(path, seed, workers, samples);
        std::cout << "running " << config.id << " ..." << std::flush;
        records.push_back(rvlab::run_experiment(config));
        std::cout << (records.back().pass ? " pass" : " FAIL") << " (gap "
                  << records.back().relative_gap << ", " << records.back().wall_time_ms / 1000.0
                  << " s)" << std::endl;
    }
    fs::path stem = output_override.empty() ? fs::path("out") / "suite" : fs::path(output_override);
    rvlab::emit_report(records, "json", stem);
    const auto rep = rvlab::emit_report(records, "csv", stem);
    std::cout << rep.summary;
    const bool all_pass = std::all_of(records.begin(), records.end(),
                                      [](const auto& r) { return r.pass; });
    return all_pass ? 0 : 1;
}

int reformat(const fs::path& records_path, const std::string& format,
             const std::string& output_override) {
    const auto records = rvlab::parse_records(records_path);
    fs::path stem = output_override.empty() ? records_path.parent_path() / records_path.stem()
                                            : fs::path(output_override);
    const auto rep = rvlab::emit_report(records, format, stem);
    std::cout << rep.summary;
    for (const auto& f : rep.files) std::cout << "wrote " << f << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo laboratory for regularly varying vectors and product mappings"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::uint64_t> samples;
    std::string output;
    app.add_option("--seed", seed, "override the master seed");
    app.add_option("--workers", workers, "worker threads (0 = hardware)");
    app.add_option("--samples", samples, "override the sample budget");
    app.add_option("--output", output, "output path stem");

    std::string run_config;
    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", run_config, "JSON experiment config")->required();

    std::string suite_dir;
    auto* verify = app.add_subcommand("verify", "run every config in a directory");
    verify->add_option("suite-dir", suite_dir, "directory of JSON configs")->required();

    std::string records_path, format = "csv";
    auto* report = app.add_subcommand("report", "re-emit a records file");
    report->add_option("records", records_path, "records JSON produced by run/verify")->required();
    report->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_one(run_config, seed, workers, samples, output);
        if (verify->parsed()) return run_suite(suite_dir, seed, workers, samples, output);
        if (report->parsed()) return reformat(records_path, format, output);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 2;
}
