#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "povmap/geo.hpp"
#include "povmap/rasters.hpp"

namespace povmap::places {

enum class Source : std::uint8_t { kListA, kListB, kRaster };

std::string_view source_name(Source s);
Source parse_source(std::string_view text);

/// Merge distance for places listed by both sources.
inline constexpr double kMergeDistanceM = 1000.0;
/// Minimum window population for an unlisted populated cell.
inline constexpr double kRasterPlaceMinPopulation = 100.0;

struct PopulatedPlace {
  std::string place_id;
  Source source = Source::kListA;
  std::vector<std::string> names;  ///< union of names of merged records, sorted
  geo::GeoPoint location;
  std::string admin1;
  std::string admin2;
  /// Population inside the 1.6, 5 and 10 km windows.
  std::array<double, 3> population{};
  bool population_nodata = false;  ///< place fell outside the population grid

  std::string joined_names() const;  ///< names joined with ';'
};

struct MergeStats {
  std::size_t accepted = 0;
  std::size_t merged = 0;
};

/// Greedy merge: list-A records first, then list-B, each in input order. A
/// record closer than 1 km to an accepted record folds into the nearest one
/// (keeping that record's coordinates and taking the union of names);
/// otherwise it is accepted. The rule also applies within a source.
std::vector<PopulatedPlace> merge_places(const std::vector<PopulatedPlace>& list_a,
                                         const std::vector<PopulatedPlace>& list_b, MergeStats* stats = nullptr);

/// Tiles `bounds` into 1.6 km cells (rows of equal latitude height, columns
/// sized at each row's mid-latitude). A cell whose total population exceeds
/// 100 and which holds no registry place yields one place at its most
/// populated pixel. Throws DataError if `bounds` does not overlap the grid.
std::vector<PopulatedPlace> extract_raster_places(const rasters::RasterGrid& pop, const geo::BBox& bounds,
                                                  const std::vector<PopulatedPlace>& registry,
                                                  std::string_view id_prefix = "R");

/// Fills the three window populations of every place (rasters::window_sum).
/// A place whose windows do not overlap the grid gets zeros and the nodata flag.
void attach_populations(std::vector<PopulatedPlace>& registry, const rasters::RasterGrid& pop);

/// Place list CSV (list inputs): place_id,name,lat,lon[,admin1,admin2].
std::vector<PopulatedPlace> read_place_list(const std::filesystem::path& path, Source source);
std::vector<PopulatedPlace> parse_place_list(std::string_view text, Source source,
                                             std::string_view origin = "<memory>");

std::string format_place_list(const std::vector<PopulatedPlace>& places);

/// Registry CSV: place_id,source,name,lat,lon,admin1,admin2,pop_1p6,pop_5,pop_10.
std::string format_registry(const std::vector<PopulatedPlace>& registry);
void write_registry(const std::vector<PopulatedPlace>& registry, const std::filesystem::path& path);
std::vector<PopulatedPlace> parse_registry(std::string_view text, std::string_view origin = "<memory>");
std::vector<PopulatedPlace> read_registry(const std::filesystem::path& path);

}  // namespace povmap::places
