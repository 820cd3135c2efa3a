#pragma once

// Best-effort isolation: each execution runs as a child process in a fresh
// temporary directory with rlimits and (when permitted) no network
// namespace. Not a security boundary.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "scotbench/bench.hpp"
#include "scotbench/candidate.hpp"

namespace scotbench::sandbox {

enum class Verdict { Pass, WrongAnswer, CompileError, RuntimeError, Timeout, ResourceLimit, HarnessError };

const char* to_string(Verdict v);
Verdict parse_verdict(std::string_view name);

struct ExecPolicy {
    double wall_timeout_s = 10.0;
    double cpu_timeout_s = 5.0;
    double compile_timeout_s = 60.0;
    std::size_t max_output_bytes = 64 * 1024;
    std::optional<std::size_t> max_memory_bytes;
    bool deny_network = true;
    std::vector<std::string> python_cmd = {"python3"};
    std::vector<std::string> cpp_cmd = {"g++", "-O1", "-std=c++17"};
    std::filesystem::path temp_root;  // empty: system temp directory
    bool keep_artifacts = false;
    std::filesystem::path artifacts_dir;  // <run_dir>/artifacts when keeping

    /// Throws Error{config} on non-positive limits or wall < cpu.
    void validate() const;
};

struct ExecutionResult {
    Verdict verdict = Verdict::HarnessError;
    std::optional<int> exit_code;
    std::int64_t duration_ms = 0;
    std::string stdout_tail;
    std::string stderr_tail;
    std::string reason;
};

nlohmann::ordered_json to_json(const ExecutionResult& r);
ExecutionResult execution_result_from_json(const nlohmann::json& j);

enum class OutcomeStatus { exited, signaled, wall_timeout, cpu_limit, spawn_failed, compile_failed, compile_timeout };

struct RawOutcome {
    OutcomeStatus status = OutcomeStatus::spawn_failed;
    int exit_code = 0;
    int signal = 0;
    std::int64_t duration_ms = 0;
    std::string stdout_tail;
    std::string stderr_tail;
    bool output_truncated = false;
    std::string error;  // harness-side explanation
};

struct ProcessLimits {
    double wall_timeout_s = 10.0;
    std::optional<double> cpu_timeout_s;
    std::optional<std::size_t> max_memory_bytes;
    std::size_t max_output_bytes = 64 * 1024;
    bool deny_network = true;
};

/// Runs argv[0] (PATH lookup) in `workdir` under `limits`.
RawOutcome run_process(const std::vector<std::string>& argv, const std::filesystem::path& workdir,
                       const ProcessLimits& limits);

RawOutcome run_python(const std::filesystem::path& program_path, const ExecPolicy& policy);
/// Compiles next to the source, then runs the binary.
RawOutcome run_cpp(const std::filesystem::path& program_path, const ExecPolicy& policy);

/// Never throws; harness faults surface as HarnessError.
ExecutionResult evaluate_candidate(const Task& task, const CandidateProgram& cand, const ExecPolicy& policy);

struct BatchItem {
    const Task* task = nullptr;
    const CandidateProgram* candidate = nullptr;
};

/// Results in input order; at most `workers` child processes at a time.
std::vector<ExecutionResult> run_batch(const std::vector<BatchItem>& items, const ExecPolicy& policy,
                                       int workers);

}  // namespace scotbench::sandbox
