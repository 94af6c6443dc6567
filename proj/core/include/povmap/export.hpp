#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "povmap/places.hpp"

namespace povmap::exports {

struct ExportRow {
  std::string place_id;
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
  std::string admin1;
  std::string admin2;
  std::optional<double> pop_1p6;
  double iwi_pred = 0.0;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Linear ramp 0 red -> 50 yellow -> 100 blue; input clamped to [0, 100].
Rgb iwi_color(double iwi);
std::string hex(const Rgb& c);

/// Joins predictions onto the registry. Places without a prediction abort
/// with DataError listing them, unless allow_partial (then they are skipped
/// and reported through `missing`).
std::vector<ExportRow> join(const std::vector<places::PopulatedPlace>& registry,
                            const std::map<std::string, double>& predictions, bool allow_partial,
                            std::vector<std::string>* missing = nullptr);

/// place_id,name,lat,lon,admin1,admin2,pop_1p6,iwi_pred
std::string format_csv(const std::vector<ExportRow>& rows);
/// FeatureCollection of Point features carrying the CSV columns as properties.
std::string format_geojson(const std::vector<ExportRow>& rows);
/// Scatter of the places, one circle per place filled by iwi_color.
std::string format_svg(const std::vector<ExportRow>& rows, std::size_t width = 800);

enum class Format : std::uint8_t { kCsv, kGeoJson, kSvg };
Format parse_format(std::string_view name);  ///< csv | geojson | svg

/// Writes places.<ext> per format into dir; returns the written paths.
std::vector<std::filesystem::path> export_maps(const std::vector<ExportRow>& rows, const std::vector<Format>& formats,
                                               const std::filesystem::path& dir);

}  // namespace povmap::exports
