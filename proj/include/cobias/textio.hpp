#pragma once

#include <string>
#include <vector>

namespace cobias {

// shortest decimal that round-trips a double exactly (17 significant digits)
std::string fmt_g17(double v);

// split on a delimiter, no quoting (none of our formats need it)
std::vector<std::string> split(const std::string& line, char delim);

double parse_double(const std::string& s, const std::string& what);
long long parse_int(const std::string& s, const std::string& what);

}  // namespace cobias
