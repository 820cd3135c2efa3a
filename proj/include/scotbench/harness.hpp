#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scotbench/bench.hpp"
#include "scotbench/llm.hpp"
#include "scotbench/passk.hpp"
#include "scotbench/pipeline.hpp"
#include "scotbench/sandbox.hpp"

namespace scotbench::harness {

enum ExitCode : int { kOk = 0, kConfigError = 1, kBackendError = 2, kHarnessError = 3 };

/// Exit code for an error of the given kind.
int exit_code_for(ErrorKind kind);

struct BenchmarkRef {
    std::filesystem::path path;
    BenchmarkFormat format = BenchmarkFormat::native;
    std::filesystem::path donor_examples_path;  // empty: none
    BenchmarkFormat donor_format = BenchmarkFormat::native;
};

struct RunConfig {
    BenchmarkRef benchmark;
    PromptTechnique technique = PromptTechnique::scot;
    std::filesystem::path example_set_path;  // empty: few_shot draws seeds, zero_shot needs none
    std::size_t example_count = 3;
    llm::BackendSpec backend;
    nlohmann::json step1_overrides = nlohmann::json::object();
    nlohmann::json step2_overrides = nlohmann::json::object();
    int n = 20;
    std::vector<int> k_values{1, 3, 5};
    sandbox::ExecPolicy exec;
    int exec_workers = 1;
    bool dedupe_executions = true;
    int gen_workers = 1;
    int max_in_flight = 4;
    std::filesystem::path output_dir;
    std::uint64_t rng_seed = 0;
    std::filesystem::path cache_path;  // empty: <output_dir>/cache.jsonl
    bool use_cache = true;
    std::filesystem::path instructions_path;  // empty: built-in instructions
    nlohmann::json source;                    // the parsed document, for the run id

    /// Parameters for each generation step after applying overrides.
    std::vector<llm::SamplingParams> step_params() const;
    std::string run_id() const;
};

/// Relative paths resolve against `base_dir`. Throws Error{config}.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Command-line knobs layered over a config.
struct Overrides {
    std::optional<double> wall_timeout_s;
    std::optional<double> cpu_timeout_s;
    std::optional<int> workers;
    std::optional<std::vector<std::string>> python_cmd;
    std::optional<std::vector<std::string>> cpp_cmd;
    std::optional<bool> keep_artifacts;
    std::optional<std::filesystem::path> output_dir;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

/// Everything that would stop a run, as human-readable lines. Empty means clean.
std::vector<std::string> check_config(const RunConfig& config);

struct Io {
    std::ostream& out;
    std::ostream& err;
};

int cmd_validate(const std::filesystem::path& config_path, const Io& io, const Overrides& overrides = {});

struct RunHooks {
    std::shared_ptr<llm::Backend> backend;  // replaces the configured backend
    std::function<void(std::chrono::duration<double>)> sleep;
};

struct RunOutcome {
    int exit_code = kOk;
    std::filesystem::path run_dir;
    std::optional<passk::Report> report;
    std::size_t backend_samples = 0;
    std::size_t executions = 0;
    std::vector<llm::RecordedCall> calls;
};

RunOutcome cmd_run(const RunConfig& config, const Io& io, const RunHooks& hooks = {});
int cmd_run(const std::filesystem::path& config_path, const Io& io, const Overrides& overrides = {});

/// Rewrites report.json and report.csv from persisted verdicts.
/// Empty `k_values` keeps the manifest's.
int cmd_score(const std::filesystem::path& run_dir, const std::vector<int>& k_values, const Io& io);

enum class CompareFormat { text, csv, json };

struct CompareOptions {
    std::optional<std::size_t> baseline;  // index into inputs; default first
    std::optional<std::size_t> target;    // default last
    CompareFormat format = CompareFormat::text;
};

/// Inputs are run directories or report.json files.
int cmd_compare(const std::vector<std::filesystem::path>& inputs, const CompareOptions& options, const Io& io);

int cmd_ingest(const std::filesystem::path& input, BenchmarkFormat format, const std::filesystem::path& output,
               const Io& io);

/// Prints seeds as JSON Lines; an empty train split falls back to `donor`.
int cmd_seeds(const BenchmarkRef& bench, std::size_t count, std::uint64_t rng_seed, const Io& io);

// Persisted verdicts ----------------------------------------------------------

struct ResultRecord {
    std::string task_id;
    int sample_index = 0;
    std::string code_sha256;
    sandbox::ExecutionResult result;
};

void save_results(const std::vector<ResultRecord>& records, const std::filesystem::path& path);
std::vector<ResultRecord> load_results(const std::filesystem::path& path);

/// Report JSON with run identification ahead of the metric fields.
nlohmann::ordered_json report_json(const passk::Report& report, const pipeline::RunManifest& manifest);

}  // namespace scotbench::harness
