#pragma once

#include <string>
#include <string_view>

namespace povmap {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-string parse; throws DataError naming `what` on failure.
double parse_double(std::string_view text, std::string_view what = "number");
long long parse_int(std::string_view text, std::string_view what = "integer");

std::string_view trim(std::string_view s);

}  // namespace povmap
