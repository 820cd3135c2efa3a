#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scotbench {

enum class Language { python, cpp };

const char* to_string(Language lang);
/// Throws Error{unsupported_language} for anything but "python" / "cpp".
Language parse_language(std::string_view tag);

inline constexpr std::string_view kCandidateMarker = "{{CANDIDATE}}";

enum class Split { train, test };

struct Task {
    std::string id;
    Language language = Language::python;
    std::string requirement;
    std::string signature;
    // Whole test program; exits 0 iff every assertion passes once the
    // marker is replaced by a candidate.
    std::string test_program_template;
    int test_count = 1;
    // Canonical solution when the source dataset ships one.
    std::optional<std::string> reference_solution;

    bool operator==(const Task&) const = default;
};

struct Benchmark {
    std::string name;
    std::vector<Task> train;
    std::vector<Task> test;

    const Task* find(std::string_view id) const;
    bool operator==(const Benchmark&) const = default;
};

struct ExampleSeed {
    std::string task_id;
    std::string requirement;
    std::string code;
};

enum class BenchmarkFormat { humaneval, mbpp, mbcpp, native };
BenchmarkFormat parse_benchmark_format(std::string_view name);
const char* to_string(BenchmarkFormat format);

/// Loads a JSON Lines benchmark. The benchmark name defaults to the file stem.
Benchmark load_benchmark(const std::filesystem::path& path, BenchmarkFormat format);

/// Native JSON Lines: one task per line with an explicit `split` field.
std::string to_native_jsonl(const Benchmark& bench);
void save_native(const Benchmark& bench, const std::filesystem::path& path);

/// Draws `count` distinct train tasks; a pure function of its arguments.
std::vector<ExampleSeed> select_example_seeds(const Benchmark& bench, std::size_t count,
                                              std::uint64_t rng_seed);

/// Empty iff every Task invariant holds.
std::vector<std::string> validate_task(const Task& task);

/// Splices `code` into the template at the candidate marker.
std::string instantiate_test_program(const Task& task, std::string_view code);

}  // namespace scotbench
