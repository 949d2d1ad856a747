#include "upn/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace upn::csv {

std::string format(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

void write_row(std::ostream& os, std::initializer_list<std::string_view> cells) {
  bool first = true;
  for (auto cell : cells) {
    if (!first) os << ',';
    os << cell;
    first = false;
  }
  os << '\n';
}

}  // namespace upn::csv
