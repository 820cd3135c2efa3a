#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "scotbench/bench.hpp"
#include "scotbench/candidate.hpp"
#include "scotbench/llm.hpp"
#include "scotbench/prompt.hpp"

namespace scotbench::pipeline {

// Sampling defaults per generation step.
struct SamplingDefaults {
    llm::SamplingParams one_step{0.8, 0.95, 300, 20, std::nullopt};     // zero-shot, few-shot
    llm::SamplingParams cot{0.8, 0.95, 600, 20, std::nullopt};          // reasoning + code in one pass
    llm::SamplingParams intermediate{0.8, 0.95, 300, 20, std::nullopt}; // two-step, step 1
    llm::SamplingParams code{0.0, 1.0, 300, 1, std::nullopt};           // two-step, step 2 (greedy)
};

/// Parameters for each step of `technique`, sized for `n` samples.
std::vector<llm::SamplingParams> default_step_params(PromptTechnique technique, int n,
                                                     const SamplingDefaults& defaults = {});

struct RunManifest {
    std::string run_id;
    std::string benchmark;
    PromptTechnique technique = PromptTechnique::scot;
    std::string example_set_path;
    int n = 20;
    std::vector<int> k_values{1, 3, 5};
    std::vector<llm::SamplingParams> step_params;  // one entry per step
    std::string backend_id;
    std::string model;
    std::string backend_config_digest;
    bool complete = false;
    std::map<std::string, int> progress;  // task id -> candidates so far

    /// Throws Error{config} unless n >= max(k_values) and step params match the technique.
    void validate() const;
};

nlohmann::ordered_json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

struct GenerationContext {
    llm::Gateway* gateway = nullptr;
    std::string backend_id;
    std::string model;
    const InstructionSet* instructions = &InstructionSet::defaults();
};

using CandidateSink = std::function<void(const CandidateProgram&)>;

/// Step 1 samples the intermediates, step 2 turns each into one program.
/// Unparseable SCoTs are kept verbatim, flagged, and still sent to step 2.
/// `sample_indices` restricts the work (resume); empty means 0..n-1.
std::vector<CandidateProgram> run_two_step(const Task& task, const std::vector<ExampleTriple>& examples,
                                           const GenerationContext& ctx, const RunManifest& cfg,
                                           const std::vector<int>& sample_indices = {},
                                           const CandidateSink& sink = {});

std::vector<CandidateProgram> run_one_step(const Task& task, const std::vector<ExampleTriple>& examples,
                                           const GenerationContext& ctx, const RunManifest& cfg,
                                           const std::vector<int>& sample_indices = {},
                                           const CandidateSink& sink = {});

struct ExtractedCode {
    std::string code;
    Extraction extraction = Extraction::failed;
    std::string preamble;  // text ahead of the extracted code
};

/// Pure and total. Precedence: fenced block (target-language tag first),
/// then from the first definition header to the end, then the whole text
/// when it looks like code; otherwise failed.
ExtractedCode extract_code(std::string_view raw, Language language);

/// Writes manifest.json and candidates.jsonl (sorted by task id, sample index).
void persist_run(const RunManifest& manifest, std::vector<CandidateProgram> candidates,
                 const std::filesystem::path& dir);

struct LoadedRun {
    RunManifest manifest;
    std::vector<CandidateProgram> candidates;
};

LoadedRun load_run(const std::filesystem::path& dir);

struct BenchmarkGeneration {
    std::vector<CandidateProgram> candidates;  // sorted, including earlier ones
    bool complete = false;
    std::string error;  // first backend failure, if any
    std::size_t new_candidates = 0;
};

/// Fills every task up to n candidates, keeping `existing` ones. Tasks run on
/// up to `workers` threads; a backend failure stops new work and is reported.
BenchmarkGeneration generate_benchmark(const std::vector<Task>& tasks, const std::vector<ExampleTriple>& examples,
                                       const GenerationContext& ctx, const RunManifest& cfg,
                                       std::vector<CandidateProgram> existing, int workers);

}  // namespace scotbench::pipeline
