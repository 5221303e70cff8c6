#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace volmo::text {

bool is_space(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// Collapses every run of ASCII whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);

std::string to_lower_ascii(std::string_view s);

bool iequals(std::string_view a, std::string_view b) noexcept;
bool istarts_with(std::string_view s, std::string_view prefix) noexcept;
bool icontains(std::string_view haystack, std::string_view needle) noexcept;

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view s);

/// Replaces the first occurrence of `placeholder` in `templ` with `value`.
/// The substituted value is never rescanned.
std::string substitute_once(std::string_view templ, std::string_view placeholder,
                            std::string_view value);

// UTF-8 helpers. Offsets in CaptionIssue spans are code-point offsets.
std::size_t codepoint_count(std::string_view s) noexcept;
std::size_t byte_to_codepoint(std::string_view s, std::size_t byte_offset) noexcept;
std::size_t codepoint_to_byte(std::string_view s, std::size_t cp_offset) noexcept;
std::string_view codepoint_slice(std::string_view s, std::size_t begin, std::size_t end) noexcept;

std::string read_file(const std::string& path);

}  // namespace volmo::text
