#pragma once

#include <string_view>

namespace povmap {

std::string_view version();

}  // namespace povmap
