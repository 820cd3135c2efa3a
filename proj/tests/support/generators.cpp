#include "generators.hpp"

#include <array>
#include <vector>

namespace scotbench::testkit {

namespace {

const std::array<const char*, 24> kWords = {
    "set",   "result", "to",    "the",   "value", "of",     "x",     "append", "item",   "list",  "return",  "count",
    "total", "plus",   "index", "is",    "empty", "number", "each",  "in",     "numbers", "a[i]", "+=",      "->"};

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::string words(std::mt19937_64& rng, int lo, int hi) {
    std::string out;
    const int count = uniform(rng, lo, hi);
    for (int i = 0; i < count; ++i) {
        if (i) out += ' ';
        out += kWords[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(kWords.size()) - 1))];
    }
    if (uniform(rng, 0, 5) == 0) out += " (x: y, z)";
    return out;
}

scot::Node random_node(std::mt19937_64& rng, int depth, const AstGenOptions& o, bool spine);

scot::Block random_block(std::mt19937_64& rng, int depth, const AstGenOptions& o, bool spine) {
    scot::Block block;
    const int size = uniform(rng, 1, o.max_block);
    const int spine_at = spine ? uniform(rng, 0, size - 1) : -1;
    for (int i = 0; i < size; ++i) block.push_back(random_node(rng, depth, o, i == spine_at));
    return block;
}

// `depth` counts the structures enclosing the node.
scot::Node random_node(std::mt19937_64& rng, int depth, const AstGenOptions& o, bool spine) {
    const bool may_nest = depth < o.max_depth;
    const int shrink = depth * 2;  // deeper levels lean towards plain steps
    const bool structure = may_nest && (spine || uniform(rng, 0, 4 + shrink) < 2);
    if (!structure) return scot::SeqStep{words(rng, 1, 6)};

    const bool keep_spine = spine && depth + 1 < o.max_depth;
    if (uniform(rng, 0, 1) == 0) {
        scot::Loop loop;
        loop.kind = uniform(rng, 0, 1) ? scot::LoopKind::for_loop : scot::LoopKind::while_loop;
        loop.header = words(rng, 1, 5);
        loop.body = random_block(rng, depth + 1, o, keep_spine);
        return loop;
    }
    scot::Branch branch;
    const int conds = uniform(rng, 1, 3);
    const bool has_else = uniform(rng, 0, 1) == 1;
    const int spine_arm = keep_spine ? uniform(rng, 0, conds - 1) : -1;
    for (int i = 0; i < conds; ++i) {
        branch.arms.push_back({words(rng, 1, 5), random_block(rng, depth + 1, o, i == spine_arm)});
    }
    if (has_else) branch.arms.push_back({std::nullopt, random_block(rng, depth + 1, o, false)});
    return branch;
}

scot::Param random_param(std::mt19937_64& rng) {
    static const std::array<const char*, 6> names = {"nums", "s", "target", "matrix", "k", "result"};
    static const std::array<const char*, 6> types = {"int", "str", "list[int]", "dict[str, int]", "list[list]",
                                                     "tuple[int, int]"};
    scot::Param p;
    p.name = std::string(names[static_cast<std::size_t>(uniform(rng, 0, 5))]) + std::to_string(uniform(rng, 0, 9));
    if (uniform(rng, 0, 2) != 0) p.type_hint = types[static_cast<std::size_t>(uniform(rng, 0, 5))];
    return p;
}

}  // namespace

scot::ScotAst random_ast(std::mt19937_64& rng, const AstGenOptions& o) {
    scot::ScotAst ast;
    if (o.with_io) {
        scot::IoDecl io;
        const int ins = uniform(rng, 0, 3);
        const int outs = uniform(rng, ins == 0 ? 1 : 0, 2);
        for (int i = 0; i < ins; ++i) io.inputs.push_back(random_param(rng));
        for (int i = 0; i < outs; ++i) io.outputs.push_back(random_param(rng));
        ast.io = std::move(io);
    }
    ast.body = random_block(rng, 0, o, o.force_depth);
    return ast;
}

std::string random_scot_like_text(std::mt19937_64& rng) {
    static const std::array<const char*, 22> pieces = {
        "Input:", "Output:", "if", "elif", "else", "for", "while", ":", "    ", "\t", "  ", "x", "y > 0",
        "return y", "```", "\n", "\r\n", ",", "[", "]", "\xff", "<NUL>"};
    std::string out;
    const int n = uniform(rng, 0, 80);
    for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(pieces.size()) - 1));
        if (idx == pieces.size() - 1) {
            out += '\0';
        } else {
            out += pieces[idx];
        }
        if (uniform(rng, 0, 3) == 0) out += ' ';
    }
    return out;
}

std::string random_bytes(std::mt19937_64& rng, std::size_t max_len) {
    std::string out(static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(max_len))), '\0');
    for (auto& ch : out) ch = static_cast<char>(uniform(rng, 0, 255));
    return out;
}

double brute_force_pass_at_k(int n, int c, int k) {
    // Samples 0..c-1 are the correct ones; walk every k-subset of n.
    std::uint64_t total = 0;
    std::uint64_t all_fail = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        ++total;
        if ((mask & ((1u << c) - 1u)) == 0) ++all_fail;
    }
    return 1.0 - static_cast<double>(all_fail) / static_cast<double>(total);
}

}  // namespace scotbench::testkit
