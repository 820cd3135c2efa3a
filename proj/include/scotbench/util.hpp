#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace scotbench::util {

using json = nlohmann::json;

std::string_view trim(std::string_view s);
std::string trim_copy(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Calls `on_record(line_number, record)` for every non-blank line of a
/// JSON Lines file. Parse failures raise ingestion errors naming the line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& on_record);

std::string format_fixed(double value, int decimals);

}  // namespace scotbench::util
