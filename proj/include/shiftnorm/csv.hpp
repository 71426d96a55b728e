#pragma once

#include <string>
#include <vector>

namespace shiftnorm {

// Shortest decimal string that parses back to the same 64-bit float.
std::string format_double(double value);

double parse_double(const std::string& text);

// Minimal comma/tab separated parsing; no quoting, which none of the file
// formats here need.
std::vector<std::string> split_line(const std::string& line, char sep);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace shiftnorm
