#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace locenc::csv {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Parses a full field as a double; throws FormatError naming `context` on failure.
double parse_double(std::string_view field, std::string_view context);

long long parse_int(std::string_view field, std::string_view context);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

/// Reads the next line without its terminator (handles CRLF). Returns false at EOF.
bool read_line(std::istream& in, std::string& line);

std::string join(const std::vector<std::string>& fields, char sep = ',');

}  // namespace locenc::csv
