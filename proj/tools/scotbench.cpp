// scotbench: run and score code-generation experiments.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scotbench/harness.hpp"

namespace fs = std::filesystem;
using namespace scotbench;

namespace {

struct ExecFlags {
    std::optional<double> timeout;
    std::optional<double> cpu_timeout;
    std::optional<int> workers;
    std::vector<std::string> python_cmd;
    std::vector<std::string> cpp_cmd;
    bool keep_artifacts = false;
    std::optional<std::string> output_dir;

    void add_to(CLI::App* app) {
        app->add_option("--timeout", timeout, "Wall-clock limit per execution, seconds");
        app->add_option("--cpu-timeout", cpu_timeout, "CPU-time limit per execution, seconds");
        app->add_option("--workers", workers, "Concurrent executions");
        app->add_option("--python-cmd", python_cmd, "Python interpreter command")->delimiter(' ');
        app->add_option("--cpp-cmd", cpp_cmd, "C++ compiler command")->delimiter(' ');
        app->add_flag("--keep-artifacts", keep_artifacts, "Keep program, stdout, stderr per sample");
        app->add_option("--output-dir", output_dir, "Override the run directory");
    }

    harness::Overrides overrides() const {
        harness::Overrides o;
        o.wall_timeout_s = timeout;
        o.cpu_timeout_s = cpu_timeout;
        o.workers = workers;
        if (!python_cmd.empty()) o.python_cmd = python_cmd;
        if (!cpp_cmd.empty()) o.cpp_cmd = cpp_cmd;
        if (keep_artifacts) o.keep_artifacts = true;
        if (output_dir) o.output_dir = fs::path(*output_dir);
        return o;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured chain-of-thought code generation benchmark harness"};
    app.require_subcommand(1);
    const harness::Io io{std::cout, std::cerr};
    int code = 0;

    std::string config;
    ExecFlags validate_flags;
    auto* validate = app.add_subcommand("validate", "Check a run config, its benchmark and examples");
    validate->add_option("config", config, "Run config (JSON)")->required();
    validate_flags.add_to(validate);
    validate->callback([&] { code = harness::cmd_validate(config, io, validate_flags.overrides()); });

    ExecFlags run_flags;
    auto* run = app.add_subcommand("run", "Generate, execute and score; resumes a partial run");
    run->add_option("config", config, "Run config (JSON)")->required();
    run_flags.add_to(run);
    run->callback([&] { code = harness::cmd_run(fs::path(config), io, run_flags.overrides()); });

    std::string run_dir;
    std::vector<int> ks;
    auto* score = app.add_subcommand("score", "Recompute reports from persisted verdicts");
    score->add_option("run_dir", run_dir, "Run directory")->required();
    score->add_option("-k,--k", ks, "k values (default: the run's)")->delimiter(',');
    score->callback([&] { code = harness::cmd_score(run_dir, ks, io); });

    std::vector<std::string> reports;
    std::optional<std::string> baseline, target;
    std::string format = "text";
    auto* compare = app.add_subcommand("compare", "Tabulate runs and the relative improvement of one over another");
    compare->add_option("runs", reports, "Run directories or report.json files");
    compare->add_option("--baseline", baseline, "Baseline run (default: first)");
    compare->add_option("--target", target, "Improved run (default: last)");
    compare->add_option("--format", format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));
    compare->callback([&] {
        std::vector<fs::path> inputs(reports.begin(), reports.end());
        const auto index_of = [&](const std::string& p) {
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                if (inputs[i] == fs::path(p)) return i;
            }
            inputs.emplace_back(p);
            return inputs.size() - 1;
        };
        harness::CompareOptions options;
        if (baseline) options.baseline = index_of(*baseline);
        if (target) options.target = index_of(*target);
        options.format = format == "csv" ? harness::CompareFormat::csv
                         : format == "json" ? harness::CompareFormat::json
                                            : harness::CompareFormat::text;
        code = harness::cmd_compare(inputs, options, io);
    });

    std::string input, output, bench_format = "native";
    auto* ingest = app.add_subcommand("ingest", "Convert a benchmark to the native JSON Lines format");
    ingest->add_option("input", input, "Source file")->required();
    ingest->add_option("--format", bench_format, "humaneval, mbpp, mbcpp or native")->required();
    ingest->add_option("-o,--output", output, "Destination file")->required();
    ingest->callback([&] {
        try {
            code = harness::cmd_ingest(input, parse_benchmark_format(bench_format), output, io);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            code = harness::kConfigError;
        }
    });

    std::string donor, donor_format = "native";
    std::size_t count = 3;
    std::uint64_t seed = 0;
    auto* seeds = app.add_subcommand("seeds", "Draw example seeds from a training split");
    seeds->add_option("input", input, "Benchmark file")->required();
    seeds->add_option("--format", bench_format, "Benchmark format");
    seeds->add_option("--donor", donor, "Benchmark to draw from when the input has no training split");
    seeds->add_option("--donor-format", donor_format, "Donor benchmark format");
    seeds->add_option("--count", count, "Number of seeds");
    seeds->add_option("--seed", seed, "RNG seed");
    seeds->callback([&] {
        try {
            harness::BenchmarkRef ref{input, parse_benchmark_format(bench_format), donor,
                                      parse_benchmark_format(donor_format)};
            code = harness::cmd_seeds(ref, count, seed, io);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            code = harness::kConfigError;
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : harness::kConfigError;
    }
    return code;
}
