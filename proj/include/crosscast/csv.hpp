#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "crosscast/common.hpp"

namespace crosscast::csv {

/// Splits one CSV line on commas. Fields in this project never contain
/// embedded commas or quotes, so no quoting rules are applied.
std::vector<std::string> split_line(const std::string& line);

/// Reads all rows of a CSV file. First row is returned as-is (callers
/// validate headers). Throws SchemaError if the file cannot be opened.
std::vector<std::vector<std::string>> read_file(const std::string& path);

/// Shortest round-trip decimal representation of a double; empty for NaN.
std::string format_value(double v);

/// Parses a decimal field; empty string yields the missing marker.
/// Throws SchemaError with `context` on malformed input.
double parse_value(const std::string& field, const std::string& context);

/// Writes content to a temp file next to `path`, then renames it into
/// place, so readers never observe a half-written file.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace crosscast::csv
