#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scotbench/llm.hpp"
#include "scotbench/prompt.hpp"

namespace scotbench {

enum class Extraction { fenced, heuristic, verbatim, failed };

const char* to_string(Extraction e);
Extraction parse_extraction(std::string_view name);

struct GenMeta {
    std::string backend_id;
    std::string model;
    std::vector<llm::SamplingParams> step_params;  // one entry per generation step

    bool operator==(const GenMeta&) const = default;
};

// One sampled program for a task.
struct CandidateProgram {
    std::string task_id;
    int sample_index = 0;
    PromptTechnique technique = PromptTechnique::zero_shot;
    std::optional<std::string> intermediate_text;
    std::string code;
    Extraction extraction = Extraction::failed;
    bool extraction_failed = false;
    bool invalid_intermediate = false;
    GenMeta gen_meta;

    bool operator==(const CandidateProgram&) const = default;
};

nlohmann::ordered_json to_json(const CandidateProgram& cand);
CandidateProgram candidate_from_json(const nlohmann::json& j);

}  // namespace scotbench
