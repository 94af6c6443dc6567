#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "povmap/geo.hpp"
#include "povmap/rasters.hpp"
#include "povmap/spatial_index.hpp"

namespace povmap::osm {

/// Highway tags counted as roads.
enum class RoadClass : std::uint8_t {
  kPrimary,
  kPrimaryLink,
  kSecondary,
  kSecondaryLink,
  kTertiary,
  kTertiaryLink,
  kTrunk,
  kTrunkLink,
  kMotorway,
};
std::optional<RoadClass> parse_road_class(std::string_view tag);
std::string_view road_class_name(RoadClass c);

enum class Surface : std::uint8_t { kPaved, kUnpaved, kUnknown };
/// Maps an OSM surface value onto paved/unpaved; anything else is unknown.
Surface classify_surface(std::string_view tag);
std::string_view surface_name(Surface s);

inline constexpr std::size_t kPoiCategoryCount = 24;
extern const std::array<std::string_view, kPoiCategoryCount> kPoiCategories;
/// Accepts the canonical snake_case name or the spaced form ("fast food").
std::optional<std::uint8_t> parse_poi_category(std::string_view name);

struct Way {
  std::string way_id;
  std::vector<geo::GeoPoint> points;
  RoadClass highway = RoadClass::kPrimary;
  Surface surface = Surface::kUnknown;
};

struct Poi {
  std::string poi_id;
  geo::GeoPoint location;
  std::uint8_t category = 0;
};

struct Building {
  std::string building_id;
  std::vector<geo::GeoPoint> ring;  ///< closed outer ring
  geo::GeoPoint centroid;
  double area_m2 = 0.0;
};

struct Reject {
  std::string layer;
  std::string record_id;
  std::string reason;
};

/// Immutable after ingest.
struct LayerSet {
  std::vector<Way> ways;
  std::vector<Poi> pois;
  std::vector<Building> buildings;
  std::size_t warnings = 0;      ///< records dropped for out-of-vocabulary tags
  std::vector<Reject> rejects;   ///< records dropped for malformed geometry
};

/// Ways and buildings are GeoJSON FeatureCollections; POIs are a CSV
/// poi_id,category,lat,lon. Empty text (or an empty file) means an empty layer.
LayerSet parse_layers(std::string_view ways_geojson, std::string_view pois_csv, std::string_view buildings_geojson);
LayerSet ingest_layers(const std::filesystem::path& ways, const std::filesystem::path& pois,
                       const std::filesystem::path& buildings);

/// Writers for the three ingestion formats; parse_layers reads them back.
std::string format_ways(std::span<const Way> ways);
std::string format_pois(std::span<const Poi> pois);
std::string format_buildings(std::span<const Building> buildings);

/// Planar (local projection) polygon area of a closed ring; throws DataError for
/// open, degenerate or self-intersecting rings.
Building make_building(std::string id, std::vector<geo::GeoPoint> ring);
bool ring_self_intersects(std::span<const geo::GeoPoint> ring);

/// A node (exact coordinate) is a junction when at least two distinct ways
/// have it as an interior node, or at least three distinct ways start or end
/// there. Output sorted by (lat, lon).
std::vector<geo::GeoPoint> detect_junctions(std::span<const Way> ways);

struct RoadStats {
  double total_m = 0.0;
  double paved_m = 0.0;
  double unpaved_m = 0.0;
  double unknown_m = 0.0;
};

/// Clips a segment to a box in lat/lon parameter space; nullopt if disjoint.
std::optional<std::pair<geo::GeoPoint, geo::GeoPoint>> clip_segment(const geo::GeoPoint& a, const geo::GeoPoint& b,
                                                                     const geo::BBox& box);
/// Sum of clipped great-circle segment lengths inside the cell.
RoadStats road_stats(std::span<const Way> ways, const geo::BBox& cell);

/// Distance fed to the model when a feature class is absent.
inline constexpr double kDistanceCapM = 100'000.0;

// Feature vector column layout.
inline constexpr std::size_t kColRoadTotal = 0;
inline constexpr std::size_t kColRoadPaved = 1;
inline constexpr std::size_t kColRoadUnpaved = 2;
inline constexpr std::size_t kColRoadUnknown = 3;
inline constexpr std::size_t kColDistRoad = 4;
inline constexpr std::size_t kColJunctionCount = 5;
inline constexpr std::size_t kColDistJunction = 6;
inline constexpr std::size_t kColBuildingCount = 7;
inline constexpr std::size_t kColBuildingArea = 8;
inline constexpr std::size_t kColPoiBegin = 9;  ///< count, distance per category
inline constexpr std::size_t kColLumBegin = kColPoiBegin + 2 * kPoiCategoryCount;  ///< 6 stats x 3 windows
inline constexpr std::size_t kColPopBegin = kColLumBegin + 18;
inline constexpr std::size_t kColImageBegin = kColPopBegin + 3;
inline constexpr std::size_t kBaseFeatureCount = kColImageBegin;
inline constexpr std::size_t kImageFeatureCount = 4;
inline constexpr std::size_t kFeatureCount = kBaseFeatureCount + kImageFeatureCount;

/// Column names in layout order.
const std::array<std::string, kFeatureCount>& feature_names();

enum FeatureFlag : std::uint32_t {
  kFlagLumWindowEmpty0 = 1u << 0,
  kFlagLumWindowEmpty1 = 1u << 1,
  kFlagLumWindowEmpty2 = 1u << 2,
  kFlagPopulationNodata = 1u << 3,
  kFlagNoLuminosityGrid = 1u << 4,
  kFlagNoPopulationGrid = 1u << 5,
};

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  std::uint32_t flags = 0;
  bool has_image_probs = false;

  /// Columns the models consume: the image-class slots join once filled.
  std::size_t active_width() const { return has_image_probs ? kFeatureCount : kBaseFeatureCount; }
  std::span<const double> active() const { return {values.data(), active_width()}; }
  void set_image_probs(std::span<const double, 4> probs);
};

/// Per-country extraction context: layer indexes built once, queries read-only.
class FeatureExtractor {
 public:
  /// Grids may be null (their columns stay zero and are flagged).
  FeatureExtractor(const LayerSet& layers, const rasters::RasterGrid* luminosity,
                   const rasters::RasterGrid* population);

  /// Pure function of (location, layers, grids).
  FeatureVector extract(const geo::GeoPoint& location) const;
  /// Extracts many locations in parallel; slot i holds locations[i].
  std::vector<FeatureVector> extract_all(std::span<const geo::GeoPoint> locations) const;

  const std::vector<geo::GeoPoint>& junctions() const { return junctions_; }

 private:
  const LayerSet& layers_;
  const rasters::RasterGrid* luminosity_;
  const rasters::RasterGrid* population_;
  std::vector<Surface> segment_surface_;
  spatial::SegmentIndex roads_;
  std::vector<geo::GeoPoint> junctions_;
  spatial::PointIndex junction_index_;
  spatial::PointIndex building_index_;
  std::array<spatial::PointIndex, kPoiCategoryCount> poi_index_;
};

/// Feature table CSV: id,lat,lon followed by the feature columns.
struct FeatureRow {
  std::string id;
  geo::GeoPoint location;
  FeatureVector features;
};
std::string format_feature_table(std::span<const FeatureRow> rows);
std::vector<FeatureRow> parse_feature_table(std::string_view text, std::string_view origin = "<memory>");

}  // namespace povmap::osm
