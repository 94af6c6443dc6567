#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "povmap/refine.hpp"

namespace povmap {

struct CountryInputs {
  std::string name;
  std::filesystem::path list_a;
  std::filesystem::path list_b;  ///< optional
  std::filesystem::path population;
  std::filesystem::path luminosity;  ///< optional
  std::filesystem::path ways;
  std::filesystem::path pois;
  std::filesystem::path buildings;
  std::filesystem::path tiles;  ///< optional tile manifest
};

/// Pipeline configuration. Relative paths resolve against the manifest's
/// directory.
struct Manifest {
  std::filesystem::path path;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::filesystem::path clusters;
  std::filesystem::path households;   ///< optional, for the iwi subcommand
  std::filesystem::path iwi_weights;  ///< optional, reference table when empty
  std::vector<CountryInputs> countries;
  refine::RefineConfig refine;

  /// (key, path) of every referenced input file, in manifest order.
  std::vector<std::pair<std::string, std::filesystem::path>> inputs() const;
};

/// Parses a manifest. Missing keys, wrong types, unknown keys and (when
/// check_paths) missing files raise UsageError naming the offending key,
/// e.g. "countries[2].ways".
Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir, bool check_paths = true);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace povmap
