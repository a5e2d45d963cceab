#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the CSV readers, the config loader and the CLI.
namespace uavguard::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char delim);

std::optional<double> to_double(std::string_view s);
std::optional<std::int64_t> to_int(std::string_view s);
std::optional<std::uint64_t> to_uint(std::string_view s);

// Shortest representation that parses back to the same double.
std::string format_double(double v);
// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

std::vector<double> parse_double_list(std::string_view s);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

} // namespace uavguard::text
