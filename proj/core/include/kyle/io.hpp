#pragma once

#include <string>

namespace kyle {

// Decimal, 17 significant digits: round-trips every finite double exactly.
std::string format_double(double value);

// Strict full-string parse; throws std::invalid_argument naming the input.
double parse_double(const std::string& text);

}  // namespace kyle
