#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scotbench/scot.hpp"

namespace scotbench {

enum class PromptTechnique { zero_shot, few_shot, cot, scot, scot_p, scot_no_basic, scot_no_io };

inline constexpr PromptTechnique kAllTechniques[] = {
    PromptTechnique::zero_shot, PromptTechnique::few_shot,      PromptTechnique::cot,
    PromptTechnique::scot,      PromptTechnique::scot_p,        PromptTechnique::scot_no_basic,
    PromptTechnique::scot_no_io,
};

const char* to_string(PromptTechnique technique);
PromptTechnique parse_technique(std::string_view name);
/// scot, scot_p and the two ablations: intermediate first, then code.
bool is_two_step(PromptTechnique technique);
/// Techniques whose intermediate is SCoT text checked by the parser.
bool uses_scot_intermediate(PromptTechnique technique);

struct CotSteps {
    std::vector<std::string> steps;
};

struct Pseudocode {
    std::string text;
};

using Intermediate = std::variant<std::monostate, CotSteps, scot::ScotAst, Pseudocode>;

struct ExampleTriple {
    std::string requirement;
    Intermediate intermediate;
    std::string code;
};

enum class Role { system, user };

struct Message {
    Role role = Role::user;
    std::string content;
};

struct Prompt {
    std::vector<Message> messages;
    PromptTechnique technique = PromptTechnique::zero_shot;
    std::size_t token_estimate = 0;  // ceil(bytes / 4)
};

/// Whole prompt as one text (system preamble, blank line, user content).
std::string flat_text(const Prompt& prompt);

namespace prompt_layout {
inline constexpr std::string_view kExampleDelimiter = "# ==== example ====";
inline constexpr std::string_view kInstructionDelimiter = "# ==== instruction ====";
inline constexpr std::string_view kRequirementDelimiter = "# ==== requirement ====";
}  // namespace prompt_layout

// Instruction wording keyed by technique, parsed from a sectioned text file.
class InstructionSet {
public:
    /// Compiled-in copy of resources/instructions.txt.
    static const InstructionSet& defaults();
    static InstructionSet parse(std::string_view text);
    /// Sections missing from the file fall back to the defaults.
    static InstructionSet load(const std::filesystem::path& path);

    const std::string& get(const std::string& key) const;
    std::string version() const;

private:
    std::map<std::string, std::string> sections_;
};

/// Step one of the two-step pipeline: prompts for an intermediate.
Prompt build_scot_prompt(const std::vector<ExampleTriple>& examples, std::string_view requirement,
                         PromptTechnique variant,
                         const InstructionSet& instructions = InstructionSet::defaults());

/// Step two: prompts for code given the requirement and its intermediate.
Prompt build_code_prompt(const std::vector<ExampleTriple>& examples, std::string_view requirement,
                         std::string_view intermediate, PromptTechnique technique,
                         const InstructionSet& instructions = InstructionSet::defaults());

Prompt build_baseline_prompt(const std::vector<ExampleTriple>& examples, std::string_view requirement,
                             PromptTechnique technique,
                             const InstructionSet& instructions = InstructionSet::defaults());

/// Example intermediate as it appears inside prompts for `technique`.
std::string render_intermediate(const ExampleTriple& example, PromptTechnique technique);

/// JSON Lines of {requirement, kind, intermediate, code}; SCoT intermediates
/// are parsed and validated.
std::vector<ExampleTriple> load_example_set(const std::filesystem::path& path);

}  // namespace scotbench
