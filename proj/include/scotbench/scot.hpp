#pragma once

// Structured chain-of-thought (SCoT) text: an input/output declaration
// followed by a block of sequence steps, branches and loops.
//
// Canonical text form:
//
//     Input: numbers: list[int]
//     Output: result: int
//     initialize result with -inf
//     for each number in numbers:
//         if the number is greater than result:
//             update result with the number
//     return result
//
// Blocks are scoped by indentation in units of 4 spaces (a tab counts as 4).
// Structure headers start with a lowercase `if`, `elif`, `else`, `for` or
// `while` and end with ':'. Every other line is a free-text step.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scotbench/bench.hpp"

namespace scotbench::scot {

inline constexpr int kDefaultMaxDepth = 8;

struct Param {
    std::string name;
    std::optional<std::string> type_hint;
};

struct IoDecl {
    std::vector<Param> inputs;
    std::vector<Param> outputs;
};

struct Node;
using Block = std::vector<Node>;

struct SeqStep {
    std::string text;
};

// An arm without a condition is the `else` arm.
struct Arm {
    std::optional<std::string> condition;
    Block body;
};

struct Branch {
    std::vector<Arm> arms;
};

enum class LoopKind { for_loop, while_loop };

struct Loop {
    LoopKind kind = LoopKind::for_loop;
    std::string header;  // text after the keyword, without the trailing ':'
    Block body;
};

struct Node {
    std::variant<SeqStep, Branch, Loop> value;

    Node(SeqStep s) : value(std::move(s)) {}
    Node(Branch b) : value(std::move(b)) {}
    Node(Loop l) : value(std::move(l)) {}
};

struct ScotAst {
    std::optional<IoDecl> io;
    Block body;
};

// Structural equality; free-text fields compare with surrounding whitespace trimmed.
bool operator==(const Param& a, const Param& b);
bool operator==(const IoDecl& a, const IoDecl& b);
bool operator==(const SeqStep& a, const SeqStep& b);
bool operator==(const Arm& a, const Arm& b);
bool operator==(const Branch& a, const Branch& b);
bool operator==(const Loop& a, const Loop& b);
bool operator==(const Node& a, const Node& b);
bool operator==(const ScotAst& a, const ScotAst& b);

enum class Severity { error, warning };

struct Diagnostic {
    int line = 1;  // 1-based
    std::string message;
    Severity severity = Severity::error;
};

std::string format_diagnostics(const std::vector<Diagnostic>& diags);

struct ParseOptions {
    bool require_io = true;
    int max_depth = kDefaultMaxDepth;
};

struct ParseResult {
    std::optional<ScotAst> ast;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return ast.has_value(); }
};

/// Total: never throws on any input. `ast` is set iff no error diagnostic was raised.
ParseResult parse(std::string_view text, const ParseOptions& options = {});

/// Canonical text; parse(render(ast)) == ast for every valid ast.
std::string render(const ScotAst& ast);

/// Structure rules on an already-built tree. Empty iff valid.
std::vector<Diagnostic> validate(const ScotAst& ast, int max_depth = kDefaultMaxDepth);

// Linearized steps used by the no-basic-structures ablation.
struct FlatScot {
    std::optional<IoDecl> io;
    std::vector<std::string> steps;
};

/// Depth-first; each branch arm and loop becomes one prose step ahead of its body.
FlatScot strip_basic_structures(const ScotAst& ast);
std::string render(const FlatScot& flat);

ScotAst strip_io(const ScotAst& ast);

struct NodeCounts {
    std::size_t steps = 0;
    std::size_t branches = 0;
    std::size_t arms = 0;
    std::size_t loops = 0;
    int max_depth = 0;  // deepest structure nesting; 0 for a flat body
};

NodeCounts count_nodes(const ScotAst& ast);

/// Code stub mirroring the structure: header from the IO declaration,
/// control keywords from branches/loops, steps as comments.
std::string to_skeleton(const ScotAst& ast, Language language,
                        std::string_view function_name = "solution");
std::string to_skeleton(const ScotAst& ast, std::string_view language,
                        std::string_view function_name = "solution");

}  // namespace scotbench::scot
