#include "povmap/version.hpp"

namespace povmap {

std::string_view version() { return POVMAP_VERSION; }

}  // namespace povmap
