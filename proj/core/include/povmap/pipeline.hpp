#pragma once

#include <optional>
#include <string>
#include <vector>

#include "povmap/manifest.hpp"
#include "povmap/osm_features.hpp"
#include "povmap/places.hpp"
#include "povmap/rasters.hpp"
#include "povmap/refine.hpp"

namespace povmap::pipeline {

/// One country's ingested inputs.
struct CountryData {
  CountryInputs inputs;
  rasters::RasterGrid population;
  std::optional<rasters::RasterGrid> luminosity;
  osm::LayerSet layers;
  std::vector<places::PopulatedPlace> registry;  ///< merged lists plus raster places
  places::MergeStats merge;
};

/// Reads grids, layers and place lists, and builds the registry.
CountryData load_country(const CountryInputs& inputs);

/// Registry features, aligned with data.registry.
std::vector<osm::FeatureVector> registry_features(const CountryData& data);

struct Loaded {
  std::vector<CountryData> countries;
  refine::RefineData data;
  std::vector<std::string> warnings;
};

/// Everything the refinement loop needs: registry places with features and
/// tiles, clusters with candidate sets. Quadrant-fallback candidates become
/// extra places without tiles.
Loaded load(const Manifest& manifest);

}  // namespace povmap::pipeline
