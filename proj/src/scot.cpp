#include "scotbench/scot.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "scotbench/error.hpp"
#include "scotbench/util.hpp"

namespace scotbench::scot {

namespace {

bool text_eq(std::string_view a, std::string_view b) { return util::trim(a) == util::trim(b); }

bool opt_text_eq(const std::optional<std::string>& a, const std::optional<std::string>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || text_eq(*a, *b);
}

}  // namespace

bool operator==(const Param& a, const Param& b) {
    return text_eq(a.name, b.name) && opt_text_eq(a.type_hint, b.type_hint);
}
bool operator==(const IoDecl& a, const IoDecl& b) {
    return a.inputs == b.inputs && a.outputs == b.outputs;
}
bool operator==(const SeqStep& a, const SeqStep& b) { return text_eq(a.text, b.text); }
bool operator==(const Arm& a, const Arm& b) {
    return opt_text_eq(a.condition, b.condition) && a.body == b.body;
}
bool operator==(const Branch& a, const Branch& b) { return a.arms == b.arms; }
bool operator==(const Loop& a, const Loop& b) {
    return a.kind == b.kind && text_eq(a.header, b.header) && a.body == b.body;
}
bool operator==(const Node& a, const Node& b) { return a.value == b.value; }
bool operator==(const ScotAst& a, const ScotAst& b) { return a.io == b.io && a.body == b.body; }

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
        if (!out.empty()) out += '\n';
        out += "line " + std::to_string(d.line) + ": " +
               (d.severity == Severity::error ? "error: " : "warning: ") + d.message;
    }
    return out;
}

namespace {

enum class LineKind { step, if_header, elif_header, else_header, for_header, while_header };

struct Classified {
    LineKind kind = LineKind::step;
    std::string payload;  // condition / loop header text, or the step itself
};

Classified classify(std::string_view raw) {
    const auto t = util::trim(raw);
    if (!t.empty() && t.back() == ':') {
        const auto head = t.substr(0, t.size() - 1);
        if (util::trim(head) == "else") return {LineKind::else_header, {}};
        static constexpr std::pair<std::string_view, LineKind> keywords[] = {
            {"if ", LineKind::if_header},
            {"elif ", LineKind::elif_header},
            {"for ", LineKind::for_header},
            {"while ", LineKind::while_header},
        };
        for (const auto& [kw, kind] : keywords) {
            if (util::starts_with(head, kw)) {
                return {kind, util::trim_copy(head.substr(kw.size()))};
            }
        }
    }
    return {LineKind::step, std::string(t)};
}

bool is_io_line(std::string_view t) {
    return util::starts_with(t, "Input:") || util::starts_with(t, "Output:");
}

bool is_fence(std::string_view t) { return util::starts_with(t, "```"); }

// Splits a parameter list on commas outside brackets.
std::vector<std::string> split_params(std::string_view list) {
    std::vector<std::string> parts;
    int depth = 0;
    std::string current;
    for (char ch : list) {
        if (ch == '(' || ch == '[' || ch == '{' || ch == '<') ++depth;
        if (ch == ')' || ch == ']' || ch == '}' || ch == '>') depth = std::max(0, depth - 1);
        if (ch == ',' && depth == 0) {
            parts.push_back(current);
            current.clear();
        } else {
            current += ch;
        }
    }
    parts.push_back(current);
    return parts;
}

// Empty optional signals a blank parameter name.
std::optional<std::vector<Param>> parse_param_list(std::string_view list) {
    std::vector<Param> params;
    if (util::trim(list).empty()) return params;
    for (const auto& part : split_params(list)) {
        Param p;
        const auto colon = part.find(':');
        p.name = util::trim_copy(std::string_view(part).substr(0, colon));
        if (colon != std::string::npos) {
            auto hint = util::trim_copy(std::string_view(part).substr(colon + 1));
            if (!hint.empty()) p.type_hint = std::move(hint);
        }
        if (p.name.empty()) return std::nullopt;
        params.push_back(std::move(p));
    }
    return params;
}

std::string render_params(const std::vector<Param>& params) {
    std::string out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += ", ";
        out += util::trim(params[i].name);
        if (params[i].type_hint) {
            out += ": ";
            out += util::trim(*params[i].type_hint);
        }
    }
    return out;
}

void render_io(const IoDecl& io, std::string& out) {
    const auto in = render_params(io.inputs);
    const auto outp = render_params(io.outputs);
    out += in.empty() ? "Input:\n" : "Input: " + in + "\n";
    out += outp.empty() ? "Output:\n" : "Output: " + outp + "\n";
}

struct SourceLine {
    int number = 0;
    int spaces = 0;
    std::string text;  // trimmed
};

class Parser {
public:
    Parser(std::string_view text, const ParseOptions& options) : options_(options) {
        const auto raw_lines = util::split_lines(text);
        last_line_ = std::max<int>(1, static_cast<int>(raw_lines.size()));
        for (std::size_t i = 0; i < raw_lines.size(); ++i) {
            const auto& raw = raw_lines[i];
            int spaces = 0;
            std::size_t k = 0;
            for (; k < raw.size() && (raw[k] == ' ' || raw[k] == '\t'); ++k) {
                spaces += raw[k] == '\t' ? 4 : 1;
            }
            auto t = util::trim(std::string_view(raw).substr(k));
            if (t.empty() || is_fence(t)) continue;
            lines_.push_back({static_cast<int>(i + 1), spaces, std::string(t)});
        }
    }

    ParseResult run() {
        ParseResult result;
        ScotAst ast;
        ast.io = parse_io();
        ast.body = parse_block(0, 0);
        while (pos_ < lines_.size()) {
            // Only reachable when an indented line follows a dedent error.
            error(lines_[pos_].number, "unexpected indentation");
            ++pos_;
        }
        if (ast.body.empty()) error(last_line_, "SCoT body is empty");
        result.diagnostics = std::move(diags_);
        const bool failed = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                                        [](const Diagnostic& d) { return d.severity == Severity::error; });
        if (!failed) result.ast = std::move(ast);
        return result;
    }

private:
    int level_of(const SourceLine& line) {
        if (line.spaces % 4 != 0 && !warned_indent_.count(line.number)) {
            warned_indent_.insert(line.number);
            error(line.number, "inconsistent indentation: " + std::to_string(line.spaces) +
                                   " spaces is not a multiple of 4");
        }
        return line.spaces / 4;
    }

    void error(int line, std::string message) {
        diags_.push_back({std::clamp(line, 1, last_line_), std::move(message), Severity::error});
    }

    std::optional<IoDecl> parse_io() {
        IoDecl io;
        bool saw_input = false;
        bool saw_output = false;
        int first_line = lines_.empty() ? 1 : lines_.front().number;
        while (pos_ < lines_.size() && lines_[pos_].spaces == 0 && is_io_line(lines_[pos_].text)) {
            const auto& line = lines_[pos_++];
            const bool input = util::starts_with(line.text, "Input:");
            bool& seen = input ? saw_input : saw_output;
            if (seen) {
                error(line.number, std::string("duplicate ") + (input ? "Input:" : "Output:") + " line");
                continue;
            }
            seen = true;
            const auto list = std::string_view(line.text).substr(input ? 6 : 7);
            auto params = parse_param_list(list);
            if (!params) {
                error(line.number, "parameter name is blank");
                continue;
            }
            (input ? io.inputs : io.outputs) = std::move(*params);
        }
        if (!saw_input && !saw_output) {
            if (options_.require_io) error(first_line, "missing IO declaration (Input:/Output: lines)");
            return std::nullopt;
        }
        if (!saw_input) error(first_line, "missing Input: line");
        if (!saw_output) error(first_line, "missing Output: line");
        if (saw_input && saw_output && io.inputs.empty() && io.outputs.empty()) {
            error(first_line, "IO declaration has neither inputs nor outputs");
        }
        return io;
    }

    // Consumes every line nested deeper than `level` without building nodes.
    void skip_deeper(int level) {
        while (pos_ < lines_.size() && lines_[pos_].spaces / 4 > level) ++pos_;
    }

    Block parse_body(const SourceLine& header, int level, int depth, const char* empty_message) {
        if (depth > options_.max_depth) {
            error(header.number, "nesting depth " + std::to_string(depth) + " exceeds limit " +
                                     std::to_string(options_.max_depth));
            skip_deeper(level);
            return {};
        }
        if (pos_ < lines_.size() && level_of(lines_[pos_]) == level + 1) {
            return parse_block(level + 1, depth);
        }
        error(header.number, empty_message);
        return {};
    }

    Block parse_block(int level, int depth) {
        Block block;
        while (pos_ < lines_.size()) {
            const auto& line = lines_[pos_];
            const int line_level = level_of(line);
            if (line_level < level) break;
            if (line_level > level) {
                error(line.number, "unexpected indentation");
                ++pos_;
                continue;
            }
            auto c = classify(line.text);
            switch (c.kind) {
                case LineKind::step:
                    ++pos_;
                    if (is_io_line(c.payload)) {
                        error(line.number, "Input:/Output: lines must precede the steps");
                    } else {
                        block.push_back(SeqStep{std::move(c.payload)});
                    }
                    break;
                case LineKind::elif_header:
                case LineKind::else_header:
                    ++pos_;
                    error(line.number, std::string("'") +
                                           (c.kind == LineKind::else_header ? "else" : "elif") +
                                           "' without a preceding 'if'");
                    skip_deeper(level);
                    break;
                case LineKind::if_header:
                    block.push_back(parse_branch(level, depth));
                    break;
                case LineKind::for_header:
                case LineKind::while_header: {
                    const auto header = line;
                    ++pos_;
                    Loop loop;
                    loop.kind = c.kind == LineKind::for_header ? LoopKind::for_loop : LoopKind::while_loop;
                    loop.header = std::move(c.payload);
                    if (loop.header.empty()) error(header.number, "loop header is empty");
                    loop.body = parse_body(header, level, depth + 1, "loop has empty body");
                    block.push_back(std::move(loop));
                    break;
                }
            }
        }
        return block;
    }

    Branch parse_branch(int level, int depth) {
        Branch branch;
        bool has_else = false;
        while (pos_ < lines_.size()) {
            const auto header = lines_[pos_];
            if (header.spaces / 4 != level) break;
            auto c = classify(header.text);
            const bool first = branch.arms.empty();
            if (first ? c.kind != LineKind::if_header
                      : (c.kind != LineKind::elif_header && c.kind != LineKind::else_header)) {
                break;
            }
            ++pos_;
            if (has_else) {
                error(header.number, "branch has an arm after 'else'");
                skip_deeper(level);
                continue;
            }
            Arm arm;
            if (c.kind == LineKind::else_header) {
                has_else = true;
            } else {
                if (c.payload.empty()) error(header.number, "branch condition is empty");
                arm.condition = std::move(c.payload);
            }
            arm.body = parse_body(header, level, depth + 1, "branch arm has empty body");
            branch.arms.push_back(std::move(arm));
        }
        return branch;
    }

    ParseOptions options_;
    std::vector<SourceLine> lines_;
    std::size_t pos_ = 0;
    int last_line_ = 1;
    std::vector<Diagnostic> diags_;
    std::set<int> warned_indent_;
};

void render_block(const Block& block, int level, std::string& out) {
    const std::string indent(static_cast<std::size_t>(level) * 4, ' ');
    for (const auto& node : block) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, SeqStep>) {
                    out += indent;
                    out += util::trim(n.text);
                    out += '\n';
                } else if constexpr (std::is_same_v<T, Branch>) {
                    for (std::size_t i = 0; i < n.arms.size(); ++i) {
                        const auto& arm = n.arms[i];
                        out += indent;
                        if (!arm.condition) {
                            out += "else:\n";
                        } else {
                            out += i == 0 ? "if " : "elif ";
                            out += util::trim(*arm.condition);
                            out += ":\n";
                        }
                        render_block(arm.body, level + 1, out);
                    }
                } else {
                    out += indent;
                    out += n.kind == LoopKind::for_loop ? "for " : "while ";
                    out += util::trim(n.header);
                    out += ":\n";
                    render_block(n.body, level + 1, out);
                }
            },
            node.value);
    }
}

bool single_line(std::string_view s) { return s.find('\n') == std::string_view::npos; }

class Validator {
public:
    explicit Validator(int max_depth) : max_depth_(max_depth) {}

    std::vector<Diagnostic> run(const ScotAst& ast) {
        line_ = 1;
        if (ast.io) {
            check_io(*ast.io);
            line_ = 3;
        }
        if (ast.body.empty()) add("SCoT body is empty");
        check_block(ast.body, 0);
        return std::move(diags_);
    }

private:
    void add(std::string message) { diags_.push_back({line_, std::move(message), Severity::error}); }

    void check_io(const IoDecl& io) {
        if (io.inputs.empty() && io.outputs.empty()) add("IO declaration has neither inputs nor outputs");
        for (const auto* list : {&io.inputs, &io.outputs}) {
            for (const auto& p : *list) {
                if (util::trim(p.name).empty()) {
                    add("parameter name is blank");
                    continue;
                }
                // The parameter must survive its own text form unchanged.
                const auto text = render_params({p});
                const auto back = parse_param_list(text);
                if (!single_line(text) || !back || back->size() != 1 || !(back->front() == p)) {
                    add("parameter '" + std::string(util::trim(p.name)) + "' is not representable");
                }
            }
        }
    }

    void check_text(std::string_view text, const char* what) {
        if (util::trim(text).empty()) {
            add(std::string(what) + " is empty");
        } else if (!single_line(text)) {
            add(std::string(what) + " spans several lines");
        }
    }

    void check_block(const Block& block, int depth) {
        for (const auto& node : block) {
            std::visit(
                [&](const auto& n) {
                    using T = std::decay_t<decltype(n)>;
                    if constexpr (std::is_same_v<T, SeqStep>) {
                        check_text(n.text, "step");
                        const auto t = util::trim(n.text);
                        if (!t.empty() && single_line(t)) {
                            if (classify(t).kind != LineKind::step) {
                                add("step '" + std::string(t) + "' reads as a structure header");
                            } else if (is_io_line(t)) {
                                add("step '" + std::string(t) + "' reads as an IO line");
                            } else if (is_fence(t)) {
                                add("step starts with a code fence");
                            }
                        }
                        ++line_;
                    } else if constexpr (std::is_same_v<T, Branch>) {
                        check_depth(depth + 1);
                        if (n.arms.empty()) add("branch has no arms");
                        for (std::size_t i = 0; i < n.arms.size(); ++i) {
                            const auto& arm = n.arms[i];
                            if (!arm.condition) {
                                if (i == 0) add("branch must start with an 'if' arm");
                                else if (i + 1 != n.arms.size()) add("'else' arm is not last");
                            } else {
                                check_text(*arm.condition, "branch condition");
                            }
                            if (arm.body.empty()) add("branch arm has empty body");
                            ++line_;
                            check_block(arm.body, depth + 1);
                        }
                    } else {
                        check_depth(depth + 1);
                        check_text(n.header, "loop header");
                        if (n.body.empty()) add("loop has empty body");
                        ++line_;
                        check_block(n.body, depth + 1);
                    }
                },
                node.value);
        }
    }

    void check_depth(int depth) {
        if (depth == max_depth_ + 1) {
            add("nesting depth " + std::to_string(depth) + " exceeds limit " + std::to_string(max_depth_));
        }
    }

    int max_depth_;
    int line_ = 1;
    std::vector<Diagnostic> diags_;
};

std::string strip_trailing_colons(std::string s) {
    while (!s.empty() && (s.back() == ':' || s.back() == ' ')) s.pop_back();
    return s;
}

void flatten(const Block& block, std::vector<std::string>& out) {
    for (const auto& node : block) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, SeqStep>) {
                    out.push_back(util::trim_copy(n.text));
                } else if constexpr (std::is_same_v<T, Branch>) {
                    for (std::size_t i = 0; i < n.arms.size(); ++i) {
                        const auto& arm = n.arms[i];
                        std::string prose = !arm.condition ? "else"
                                            : i == 0       ? "if " + util::trim_copy(*arm.condition)
                                                           : "else if " + util::trim_copy(*arm.condition);
                        out.push_back(strip_trailing_colons(std::move(prose)));
                        flatten(arm.body, out);
                    }
                } else {
                    out.push_back(strip_trailing_colons(
                        (n.kind == LoopKind::for_loop ? "for " : "while ") + util::trim_copy(n.header)));
                    flatten(n.body, out);
                }
            },
            node.value);
    }
}

void count_block(const Block& block, int depth, NodeCounts& counts) {
    for (const auto& node : block) {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, SeqStep>) {
                    ++counts.steps;
                } else if constexpr (std::is_same_v<T, Branch>) {
                    ++counts.branches;
                    counts.arms += n.arms.size();
                    counts.max_depth = std::max(counts.max_depth, depth + 1);
                    for (const auto& arm : n.arms) count_block(arm.body, depth + 1, counts);
                } else {
                    ++counts.loops;
                    counts.max_depth = std::max(counts.max_depth, depth + 1);
                    count_block(n.body, depth + 1, counts);
                }
            },
            node.value);
    }
}

class SkeletonWriter {
public:
    explicit SkeletonWriter(Language lang) : lang_(lang) {}

    std::string write(const ScotAst& ast, std::string_view name) {
        const bool py = lang_ == Language::python;
        std::vector<Param> inputs, outputs;
        if (ast.io) {
            inputs = ast.io->inputs;
            outputs = ast.io->outputs;
        }
        std::string params;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (i) params += ", ";
            const auto pname = util::trim_copy(inputs[i].name);
            if (py) {
                params += pname;
                if (inputs[i].type_hint) params += ": " + util::trim_copy(*inputs[i].type_hint);
            } else {
                params += (inputs[i].type_hint ? util::trim_copy(*inputs[i].type_hint) : "auto") + " " + pname;
            }
        }
        out_ = py ? "def " + std::string(name) + "(" + params + "):\n"
                  : "auto " + std::string(name) + "(" + params + ") {\n";
        block(ast.body, 1, !outputs.empty());
        if (!outputs.empty()) {
            std::vector<std::string> names;
            for (const auto& p : outputs) names.push_back(util::trim_copy(p.name));
            const auto joined = util::join(names, ", ");
            out_ += "    return " + (py || names.size() == 1 ? joined : "{" + joined + "}") + (py ? "\n" : ";\n");
        }
        if (!py) out_ += "}\n";
        return std::move(out_);
    }

private:
    void line(int level, std::string_view text) {
        out_.append(static_cast<std::size_t>(level) * 4, ' ');
        out_ += text;
        out_ += '\n';
    }

    // `followed` is set when a statement comes after the block at the same level.
    void block(const Block& body, int level, bool followed = false) {
        const bool py = lang_ == Language::python;
        bool has_statement = false;
        for (const auto& node : body) {
            std::visit(
                [&](const auto& n) {
                    using T = std::decay_t<decltype(n)>;
                    if constexpr (std::is_same_v<T, SeqStep>) {
                        line(level, (py ? "# " : "// ") + util::trim_copy(n.text));
                    } else if constexpr (std::is_same_v<T, Branch>) {
                        has_statement = true;
                        for (std::size_t i = 0; i < n.arms.size(); ++i) {
                            const auto& arm = n.arms[i];
                            const auto cond = arm.condition ? util::trim_copy(*arm.condition) : "";
                            if (py) {
                                line(level, !arm.condition ? std::string("else:")
                                                           : (i == 0 ? "if " : "elif ") + cond + ":");
                            } else {
                                line(level, !arm.condition ? std::string("} else {")
                                                           : (i == 0 ? "if (" : "} else if (") + cond + ") {");
                            }
                            block(arm.body, level + 1);
                        }
                        if (!py) line(level, "}");
                    } else {
                        has_statement = true;
                        const auto kw = n.kind == LoopKind::for_loop ? "for" : "while";
                        const auto hdr = util::trim_copy(n.header);
                        line(level, py ? std::string(kw) + " " + hdr + ":" : std::string(kw) + " (" + hdr + ") {");
                        block(n.body, level + 1);
                        if (!py) line(level, "}");
                    }
                },
                node.value);
        }
        if (py && !has_statement && !followed) line(level, "pass");
    }

    Language lang_;
    std::string out_;
};

}  // namespace

ParseResult parse(std::string_view text, const ParseOptions& options) {
    return Parser(text, options).run();
}

std::string render(const ScotAst& ast) {
    std::string out;
    if (ast.io) render_io(*ast.io, out);
    render_block(ast.body, 0, out);
    return out;
}

std::vector<Diagnostic> validate(const ScotAst& ast, int max_depth) {
    return Validator(max_depth).run(ast);
}

FlatScot strip_basic_structures(const ScotAst& ast) {
    FlatScot flat;
    flat.io = ast.io;
    flatten(ast.body, flat.steps);
    return flat;
}

std::string render(const FlatScot& flat) {
    std::string out;
    if (flat.io) render_io(*flat.io, out);
    for (const auto& step : flat.steps) {
        out += util::trim(step);
        out += '\n';
    }
    return out;
}

ScotAst strip_io(const ScotAst& ast) { return ScotAst{std::nullopt, ast.body}; }

NodeCounts count_nodes(const ScotAst& ast) {
    NodeCounts counts;
    count_block(ast.body, 0, counts);
    return counts;
}

std::string to_skeleton(const ScotAst& ast, Language language, std::string_view function_name) {
    return SkeletonWriter(language).write(ast, function_name);
}

std::string to_skeleton(const ScotAst& ast, std::string_view language, std::string_view function_name) {
    return to_skeleton(ast, parse_language(language), function_name);
}

}  // namespace scotbench::scot
