#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>

namespace upn::csv {

/// Shortest round-trip decimal form ('.' separator, locale independent).
std::string format(double value);

inline std::string format(bool value) { return value ? "1" : "0"; }

/// Writes one LF-terminated row of already formatted cells.
void write_row(std::ostream& os, std::initializer_list<std::string_view> cells);

}  // namespace upn::csv
