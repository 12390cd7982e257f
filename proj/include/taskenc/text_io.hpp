#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace taskenc::text {

/// Splits one CSV record. Double-quoted fields may contain commas and `""` escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string csv_field(std::string_view field);

std::string join_csv(const std::vector<std::string>& fields);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

/// Parses a full cell as a double; returns false on any trailing garbage.
bool parse_double(std::string_view cell, double& out);

bool parse_int64(std::string_view cell, std::int64_t& out);

std::string trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: truncate and write, IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Reads non-empty lines of a text file (handles CRLF).
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// FNV-1a 64-bit hash, hex encoded. Used for manifest fingerprints.
std::string fnv1a_hex(std::string_view bytes);

} // namespace taskenc::text
