#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vqaflow::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);
bool starts_with(std::string_view s, std::string_view prefix);

/// Collapse every run of whitespace to a single space and trim the ends.
std::string collapse_whitespace(std::string_view s);

/// Split on a delimiter character; pieces are trimmed, empties dropped.
std::vector<std::string> split_trimmed(std::string_view s, char delim);

/// English number words "zero".."twenty" to their value; nullopt otherwise.
/// Lookup is case-insensitive.
std::optional<long long> number_word_value(std::string_view word);

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(std::string_view encoded);

std::string to_hex(const std::uint8_t* data, std::size_t len);

/// One-line preview of a possibly long / multi-line payload, for trace
/// summaries. Newlines become spaces, output capped at max_len chars with a
/// trailing ellipsis mark.
std::string summarize(std::string_view s, std::size_t max_len = 120);

}  // namespace vqaflow::text
