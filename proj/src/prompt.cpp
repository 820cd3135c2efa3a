#include "scotbench/prompt.hpp"

#include <algorithm>

#include "scotbench/error.hpp"
#include "scotbench/instructions_resource.hpp"
#include "scotbench/util.hpp"

namespace scotbench {

using util::json;

const char* to_string(PromptTechnique technique) {
    switch (technique) {
        case PromptTechnique::zero_shot: return "zero_shot";
        case PromptTechnique::few_shot: return "few_shot";
        case PromptTechnique::cot: return "cot";
        case PromptTechnique::scot: return "scot";
        case PromptTechnique::scot_p: return "scot_p";
        case PromptTechnique::scot_no_basic: return "scot_no_basic";
        case PromptTechnique::scot_no_io: return "scot_no_io";
    }
    return "zero_shot";
}

PromptTechnique parse_technique(std::string_view name) {
    for (auto t : kAllTechniques) {
        if (name == to_string(t)) return t;
    }
    throw Error(ErrorKind::argument, "unknown prompting technique '" + std::string(name) + "'");
}

bool is_two_step(PromptTechnique technique) {
    return technique == PromptTechnique::scot || technique == PromptTechnique::scot_p ||
           technique == PromptTechnique::scot_no_basic || technique == PromptTechnique::scot_no_io;
}

bool uses_scot_intermediate(PromptTechnique technique) {
    return is_two_step(technique) && technique != PromptTechnique::scot_p;
}

std::string flat_text(const Prompt& prompt) {
    std::string out;
    for (const auto& m : prompt.messages) {
        if (!out.empty()) out += "\n\n";
        out += m.content;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Instructions

InstructionSet InstructionSet::parse(std::string_view text) {
    InstructionSet set;
    std::string key;
    std::string body;
    auto flush = [&] {
        if (!key.empty()) set.sections_[key] = util::trim_copy(body);
        body.clear();
    };
    for (const auto& line : util::split_lines(text)) {
        const auto t = util::trim(line);
        if (!t.empty() && t.front() == '#') {
            if (key.empty() && util::starts_with(t, "# version:")) {
                set.sections_["#version"] = util::trim_copy(t.substr(10));
            }
            continue;
        }
        if (t.size() > 2 && t.front() == '[' && t.back() == ']') {
            flush();
            key = std::string(t.substr(1, t.size() - 2));
            continue;
        }
        if (!key.empty()) {
            body += line;
            body += '\n';
        }
    }
    flush();
    return set;
}

const InstructionSet& InstructionSet::defaults() {
    static const InstructionSet set = parse(detail::kDefaultInstructions);
    return set;
}

InstructionSet InstructionSet::load(const std::filesystem::path& path) {
    auto set = defaults();
    const auto overrides = parse(util::read_file(path));
    for (const auto& [k, v] : overrides.sections_) set.sections_[k] = v;
    return set;
}

const std::string& InstructionSet::get(const std::string& key) const {
    const auto it = sections_.find(key);
    if (it == sections_.end()) throw Error(ErrorKind::config, "no instruction text for '" + key + "'");
    return it->second;
}

std::string InstructionSet::version() const {
    const auto it = sections_.find("#version");
    return it == sections_.end() ? "unversioned" : it->second;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

using namespace prompt_layout;

const char* intermediate_label(PromptTechnique technique) {
    switch (technique) {
        case PromptTechnique::cot: return "Reasoning:";
        case PromptTechnique::scot_p: return "Pseudocode:";
        default: return "SCoT:";
    }
}

std::string with_newline(std::string_view text) {
    std::string s(text);
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\r')) s.pop_back();
    return s + "\n";
}

constexpr const char* kKindNames[] = {"none", "cot", "scot", "pseudocode"};

// Intermediate kind each technique's examples must carry.
std::size_t expected_kind(PromptTechnique technique) {
    switch (technique) {
        case PromptTechnique::zero_shot:
        case PromptTechnique::few_shot: return 0;
        case PromptTechnique::cot: return 1;
        case PromptTechnique::scot_p: return 3;
        default: return 2;
    }
}

void check_examples(const std::vector<ExampleTriple>& examples, PromptTechnique technique, bool need_code) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (ex.intermediate.index() != expected_kind(technique)) {
            throw Error(ErrorKind::argument, "example " + std::to_string(i + 1) + " carries a '" +
                                                 kKindNames[ex.intermediate.index()] + "' intermediate, but " +
                                                 to_string(technique) + " needs '" +
                                                 kKindNames[expected_kind(technique)] + "'");
        }
        if (util::trim(ex.requirement).empty()) {
            throw Error(ErrorKind::argument, "example " + std::to_string(i + 1) + " has an empty requirement");
        }
        if (need_code && util::trim(ex.code).empty()) {
            throw Error(ErrorKind::argument, "example " + std::to_string(i + 1) + " has no code");
        }
    }
}

Prompt finish(std::string user, PromptTechnique technique, const InstructionSet& instructions) {
    Prompt prompt;
    prompt.technique = technique;
    const auto& system = instructions.get("system");
    if (!system.empty()) prompt.messages.push_back({Role::system, system});
    prompt.messages.push_back({Role::user, std::move(user)});
    const auto bytes = flat_text(prompt).size();
    prompt.token_estimate = (bytes + 3) / 4;
    return prompt;
}

void append_instruction(std::string& out, const std::string& text) {
    out += kInstructionDelimiter;
    out += '\n';
    out += with_newline(text);
    out += '\n';
}

void require_text(std::string_view requirement) {
    if (util::trim(requirement).empty()) throw Error(ErrorKind::argument, "requirement is empty");
}

}  // namespace

std::string render_intermediate(const ExampleTriple& example, PromptTechnique technique) {
    const auto& im = example.intermediate;
    if (const auto* ast = std::get_if<scot::ScotAst>(&im)) {
        switch (technique) {
            case PromptTechnique::scot_no_basic: return scot::render(scot::strip_basic_structures(*ast));
            case PromptTechnique::scot_no_io: return scot::render(scot::strip_io(*ast));
            default: return scot::render(*ast);
        }
    }
    if (const auto* cot = std::get_if<CotSteps>(&im)) {
        std::string out;
        for (std::size_t i = 0; i < cot->steps.size(); ++i) {
            out += std::to_string(i + 1) + ". " + util::trim_copy(cot->steps[i]) + "\n";
        }
        return out;
    }
    if (const auto* pseudo = std::get_if<Pseudocode>(&im)) return with_newline(pseudo->text);
    return {};
}

Prompt build_scot_prompt(const std::vector<ExampleTriple>& examples, std::string_view requirement,
                         PromptTechnique variant, const InstructionSet& instructions) {
    if (!is_two_step(variant)) {
        throw Error(ErrorKind::argument,
                    std::string("build_scot_prompt does not handle technique ") + to_string(variant));
    }
    if (examples.empty()) throw Error(ErrorKind::precondition, "a SCoT prompt needs at least one example");
    require_text(requirement);
    check_examples(examples, variant, false);

    const auto label = intermediate_label(variant);
    std::string out;
    for (const auto& ex : examples) {
        out += kExampleDelimiter;
        out += "\nRequirement:\n" + with_newline(ex.requirement);
        out += std::string(label) + "\n" + with_newline(render_intermediate(ex, variant)) + "\n";
    }
    append_instruction(out, instructions.get(std::string(to_string(variant)) + ".intermediate"));
    out += kRequirementDelimiter;
    out += "\nRequirement:\n" + with_newline(requirement) + label + "\n";
    return finish(std::move(out), variant, instructions);
}

Prompt build_code_prompt(const std::vector<ExampleTriple>& examples, std::string_view requirement,
                         std::string_view intermediate, PromptTechnique technique,
                         const InstructionSet& instructions) {
    if (!is_two_step(technique)) {
        throw Error(ErrorKind::argument,
                    std::string("build_code_prompt does not handle technique ") + to_string(technique));
    }
    if (examples.empty()) throw Error(ErrorKind::precondition, "a code prompt needs at least one example");
    require_text(requirement);
    if (util::trim(intermediate).empty()) {
        throw Error(ErrorKind::argument,
                    std::string("missing intermediate for two-step technique ") + to_string(technique));
    }
    check_examples(examples, technique, true);

    const auto label = intermediate_label(technique);
    std::string out;
    for (const auto& ex : examples) {
        out += kExampleDelimiter;
        out += "\nRequirement:\n" + with_newline(ex.requirement);
        out += std::string(label) + "\n" + with_newline(render_intermediate(ex, technique));
        out += "Code:\n" + with_newline(ex.code) + "\n";
    }
    append_instruction(out, instructions.get(std::string(to_string(technique)) + ".code"));
    out += kRequirementDelimiter;
    out += "\nRequirement:\n" + with_newline(requirement);
    out += std::string(label) + "\n" + with_newline(intermediate) + "Code:\n";
    return finish(std::move(out), technique, instructions);
}

Prompt build_baseline_prompt(const std::vector<ExampleTriple>& examples, std::string_view requirement,
                             PromptTechnique technique, const InstructionSet& instructions) {
    if (is_two_step(technique)) {
        throw Error(ErrorKind::argument,
                    std::string("build_baseline_prompt does not handle technique ") + to_string(technique));
    }
    require_text(requirement);
    if (technique == PromptTechnique::zero_shot && !examples.empty()) {
        throw Error(ErrorKind::argument, "zero_shot takes no examples, got " + std::to_string(examples.size()));
    }
    if (technique != PromptTechnique::zero_shot && examples.empty()) {
        throw Error(ErrorKind::argument, std::string(to_string(technique)) + " needs at least one example");
    }
    check_examples(examples, technique, true);

    const bool cot = technique == PromptTechnique::cot;
    std::string out;
    for (const auto& ex : examples) {
        out += kExampleDelimiter;
        out += "\nRequirement:\n" + with_newline(ex.requirement);
        if (cot) out += std::string(intermediate_label(technique)) + "\n" + render_intermediate(ex, technique);
        out += "Code:\n" + with_newline(ex.code) + "\n";
    }
    append_instruction(out, instructions.get(to_string(technique)));
    out += kRequirementDelimiter;
    out += "\nRequirement:\n" + with_newline(requirement);
    out += cot ? intermediate_label(technique) : "Code:";
    out += '\n';
    return finish(std::move(out), technique, instructions);
}

std::vector<ExampleTriple> load_example_set(const std::filesystem::path& path) {
    std::vector<ExampleTriple> triples;
    util::for_each_jsonl(path, [&](std::size_t line, const json& rec) {
        const auto where = path.string() + ":" + std::to_string(line);
        try {
            ExampleTriple ex;
            ex.requirement = rec.at("requirement").get<std::string>();
            ex.code = rec.at("code").get<std::string>();
            const auto kind = rec.at("kind").get<std::string>();
            const auto& im = rec.contains("intermediate") ? rec["intermediate"] : json();
            if (kind == "none") {
                ex.intermediate = std::monostate{};
            } else if (kind == "cot") {
                CotSteps steps;
                if (im.is_array()) {
                    steps.steps = im.get<std::vector<std::string>>();
                } else {
                    for (const auto& l : util::split_lines(im.get<std::string>())) {
                        if (!util::trim(l).empty()) steps.steps.push_back(util::trim_copy(l));
                    }
                }
                if (steps.steps.empty()) throw Error(ErrorKind::example_set, "CoT intermediate has no steps");
                ex.intermediate = std::move(steps);
            } else if (kind == "scot") {
                auto parsed = scot::parse(im.get<std::string>());
                if (!parsed.ok()) {
                    throw Error(ErrorKind::example_set,
                                "invalid SCoT:\n" + scot::format_diagnostics(parsed.diagnostics));
                }
                ex.intermediate = std::move(*parsed.ast);
            } else if (kind == "pseudocode") {
                const auto text = im.get<std::string>();
                if (util::trim(text).empty()) throw Error(ErrorKind::example_set, "pseudocode is empty");
                ex.intermediate = Pseudocode{text};
            } else {
                throw Error(ErrorKind::example_set, "unknown intermediate kind '" + kind + "'");
            }
            triples.push_back(std::move(ex));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::example_set, where + ": malformed example: " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorKind::example_set, where + ": " + e.what());
        }
    });
    if (triples.empty()) throw Error(ErrorKind::example_set, path.string() + ": no examples");
    return triples;
}

}  // namespace scotbench
