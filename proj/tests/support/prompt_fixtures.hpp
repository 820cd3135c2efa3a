#pragma once

#include <string>
#include <vector>

#include "scotbench/prompt.hpp"

namespace scotbench::testkit {

// Requirement used by every prompt golden.
extern const char* const kGoldenRequirement;
// SCoT for kGoldenRequirement; step-one output for the two-step goldens.
extern const char* const kGoldenScot;

std::vector<ExampleTriple> example_set(const std::string& name);
/// Fixture example set each technique is rendered with.
std::string example_set_for(PromptTechnique t);
/// Intermediate text handed to the code prompt, as step one would produce it.
std::string step_one_output(PromptTechnique t);

/// "### <role>\n" + content per message.
std::string serialize(const Prompt& p);

struct GoldenPrompt {
    std::string name;  // file stem under the golden directory
    Prompt prompt;
    std::size_t examples = 0;
};

/// Every golden prompt: one per one-step technique, step1/step2 per two-step technique.
std::vector<GoldenPrompt> golden_prompts();

}  // namespace scotbench::testkit
