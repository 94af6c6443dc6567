#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "povmap/clusters.hpp"
#include "povmap/geo.hpp"
#include "povmap/imgcls.hpp"
#include "povmap/osm_features.hpp"
#include "povmap/places.hpp"
#include "povmap/rasters.hpp"

namespace povmap::synth {

/// Object intensities as functions of latent wealth w in [0, 100].
struct Densities {
  double streets_per_wealth = 1.0 / 12.0;  ///< street lines per axis: 1 + floor(w * this)
  double street_spacing_m = 150.0;
  double buildings_per_wealth = 1.0 / 6.0;  ///< buildings: 1 + floor(w * this)
  double building_side_base_m = 6.0;
  double building_side_per_wealth_m = 0.125;
  double poi_rate = 0.04;  ///< expected POIs per category per wealth point / 10
  double pop_base = 300.0;
  double pop_per_wealth = 30.0;
  double lum_per_wealth = 0.4;
  double lum_floor_wealth = 20.0;  ///< no light below this wealth
};

struct SynthSpec {
  std::size_t countries = 5;
  std::size_t places_per_country = 400;
  std::size_t clusters_per_country = 100;
  /// Per-country cluster counts; overrides clusters_per_country when non-empty.
  std::vector<std::size_t> cluster_counts;
  double country_span_deg = 0.6;
  double min_place_spacing_m = 2000.0;
  std::size_t bumps = 6;
  double bump_radius_km = 12.0;
  double bump_amplitude = 50.0;
  double base_min = 10.0;
  double base_max = 40.0;
  double sigma = 5.0;  ///< observation noise on cluster IWI
  Densities densities;
  double urban_wealth = 60.0;
  double list_b_fraction = 0.3;
  double list_b_jitter_m = 300.0;
  std::size_t list_b_extra = 10;
  std::size_t tile_size = 64;
  double tile_extent_m = 1200.0;
  double tile_noise = 0.08;
  double pop_cellsize_deg = 1.0 / 600.0;
  double lum_cellsize_deg = 1.0 / 240.0;
  std::uint64_t seed = 1;

  std::size_t clusters_for(std::size_t country) const;
  /// Throws UsageError for an infeasible spec.
  void validate() const;
};

SynthSpec parse_synth_spec(std::string_view json_text);
std::string format_synth_spec(const SynthSpec& spec);

struct TruePlace {
  std::string place_id;
  geo::GeoPoint location;
  double wealth = 0.0;
};

struct ClusterTruth {
  std::string cluster_id;
  std::string place_id;
  geo::GeoPoint true_location;
  double displacement_m = 0.0;
  double wealth = 0.0;
};

struct CountryWorld {
  std::string name;
  geo::BBox bounds;
  std::vector<places::PopulatedPlace> list_a;
  std::vector<places::PopulatedPlace> list_b;
  rasters::RasterGrid population;
  rasters::RasterGrid luminosity;
  osm::LayerSet layers;
  std::vector<TruePlace> truth;  ///< list A, list-B-only, then raster places
  std::vector<clusters::SurveyCluster> clusters;
  std::vector<ClusterTruth> cluster_truth;  ///< aligned with clusters
  std::vector<imgcls::Tile> tiles;          ///< aligned with truth
};

struct World {
  SynthSpec spec;
  std::vector<CountryWorld> countries;
};

/// Latent wealth of one country's field at a point.
struct WealthField {
  double base = 0.0;
  std::vector<geo::GeoPoint> centers;
  std::vector<double> amplitudes;
  double radius_m = 0.0;

  double at(const geo::GeoPoint& p) const;
};

/// Same spec (including seed) gives the same world.
World generate(const SynthSpec& spec);

/// Writes every input file plus ground_truth.csv, cluster_truth.csv and
/// manifest.json. `pipeline` is a JSON object merged into the manifest
/// (refine, gbt and cnn settings); pass "{}" for defaults.
std::filesystem::path write_world(const World& world, const std::filesystem::path& dir,
                                  std::string_view pipeline_json = "{}");

struct CeilingResult {
  double r2 = 0.0;
  std::size_t rows = 0;
};

/// Held-out pearson2 R2 of the reference GBT fitted on features at the true
/// (undisplaced) cluster places against the observed IWI, pooled 5-fold.
CeilingResult ceiling(const World& world, std::uint64_t seed = 0);

}  // namespace povmap::synth
