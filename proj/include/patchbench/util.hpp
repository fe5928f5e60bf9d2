// Small shared utilities: hashing, filesystem helpers, string/line handling.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace patchbench {

// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

// Deterministic digest of a directory tree: hashes sorted (relative path,
// content) pairs of every regular file. Used for sandbox verification.
std::string digest_tree(const std::filesystem::path& root);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
void copy_tree(const std::filesystem::path& from, const std::filesystem::path& to);

// All regular files under root, as sorted /-separated relative paths.
std::vector<std::string> list_tree(const std::filesystem::path& root);

// Lines of `text` split on '\n'. A final line without trailing newline is
// kept; `final_newline` reports whether the text ended with '\n'.
struct SplitLines {
    std::vector<std::string> lines;
    bool final_newline = true;
};
SplitLines split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines, bool final_newline);

std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
std::vector<std::string> tail_lines(const std::string& text, size_t n);

// Glob match with '*' (any run, including '/') and '?' (single char).
bool glob_match(std::string_view pattern, std::string_view path);
bool matches_any_glob(const std::vector<std::string>& patterns, std::string_view path);

// Replaces every "{key}" occurrence in `tmpl` for each (key, value) pair.
std::string substitute_placeholders(
    std::string tmpl, const std::vector<std::pair<std::string, std::string>>& vars);

int64_t now_ms();

}  // namespace patchbench
