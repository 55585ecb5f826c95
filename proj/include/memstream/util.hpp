#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace memstream::util {

std::string trim(std::string_view s);
std::string rtrim(std::string_view s);
std::string to_lower(std::string_view s);

/// Collapse every run of whitespace to a single space.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_icase(std::string_view s, std::string_view prefix);
std::size_t find_icase(std::string_view haystack, std::string_view needle);

/// FNV-1a, 64-bit. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view s);

/// splitmix64 step; mutates the state and returns the next value.
std::uint64_t splitmix64(std::uint64_t& state);

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Err = 3 };
void set_log_level(LogLevel level);
LogLevel log_level_from_name(std::string_view name);
void log(LogLevel level, const std::string& message);

}  // namespace memstream::util
