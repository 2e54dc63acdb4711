#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skillguard {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string rtrim(std::string_view s);

// Splits on '\n', dropping one trailing '\r' per line. A trailing newline
// does not produce an extra empty line.
std::vector<std::string> split_lines(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string hex_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> hex_decode(std::string_view hex);

// fnmatch-style matching: '*' matches any run of characters (including '/'),
// '?' matches a single character. Everything else is literal.
bool glob_match(std::string_view pattern, std::string_view text);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view content);
// Writes to a sibling temp file, then renames into place.
void write_file_atomic(const std::filesystem::path& p, std::string_view content);

// Lowercase alphanumeric word tokens of length >= min_len.
std::vector<std::string> word_tokens(std::string_view text, std::size_t min_len = 3);

bool is_valid_ipv4(std::string_view s);
bool is_valid_ipv6(std::string_view s);

// Formats a double with up to `decimals` fractional digits, trailing zeros
// trimmed ("58.44", "60", "10.5"). Used for display only; scores stay exact
// doubles internally.
std::string format_score(double value, int decimals = 2);

}  // namespace skillguard
