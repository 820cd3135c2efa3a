#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "scotbench/scot.hpp"

namespace scotbench::testkit {

struct AstGenOptions {
    int max_depth = 8;
    int max_block = 4;
    bool with_io = true;
    bool force_depth = false;  // plant one chain of structures reaching max_depth
};

/// Random valid AST; steps, conditions and headers are free text.
scot::ScotAst random_ast(std::mt19937_64& rng, const AstGenOptions& options = {});

/// Arbitrary text biased towards SCoT-looking lines (keywords, colons,
/// odd indentation, tabs, IO lines, control bytes).
std::string random_scot_like_text(std::mt19937_64& rng);

/// Arbitrary bytes, including NUL and invalid UTF-8.
std::string random_bytes(std::mt19937_64& rng, std::size_t max_len);

/// 1 - (#k-subsets with no correct sample) / (#k-subsets), by enumeration.
double brute_force_pass_at_k(int n, int c, int k);

}  // namespace scotbench::testkit
