#include "povmap/pipeline.hpp"

#include <algorithm>
#include <map>

#include "povmap/clusters.hpp"
#include "povmap/error.hpp"
#include "povmap/parallel.hpp"
#include "povmap/spatial_index.hpp"
#include "povmap/tile.hpp"

namespace povmap::pipeline {

CountryData load_country(const CountryInputs& in) {
  CountryData d;
  d.inputs = in;
  d.population = rasters::read_grid(in.population);
  if (!in.luminosity.empty()) d.luminosity = rasters::read_grid(in.luminosity);
  d.layers = osm::ingest_layers(in.ways, in.pois, in.buildings);
  const auto list_a = places::read_place_list(in.list_a, places::Source::kListA);
  const auto list_b = in.list_b.empty() ? std::vector<places::PopulatedPlace>{}
                                        : places::read_place_list(in.list_b, places::Source::kListB);
  d.registry = places::merge_places(list_a, list_b, &d.merge);
  auto raster = places::extract_raster_places(d.population, d.population.bounds(), d.registry, in.name + "-R");
  d.registry.insert(d.registry.end(), raster.begin(), raster.end());
  places::attach_populations(d.registry, d.population);
  return d;
}

std::vector<osm::FeatureVector> registry_features(const CountryData& data) {
  const osm::FeatureExtractor fx(data.layers, data.luminosity ? &*data.luminosity : nullptr, &data.population);
  std::vector<geo::GeoPoint> at;
  for (const auto& p : data.registry) at.push_back(p.location);
  return fx.extract_all(at);
}

Loaded load(const Manifest& manifest) {
  Loaded out;
  std::map<std::string, std::size_t> country_index;
  for (const auto& in : manifest.countries) {
    country_index[in.name] = out.countries.size();
    out.countries.push_back(load_country(in));
    const auto& c = out.countries.back();
    if (c.layers.warnings) {
      out.warnings.push_back(in.name + ": " + std::to_string(c.layers.warnings) + " layer records with unknown tags skipped");
    }
    for (const auto& r : c.layers.rejects) {
      out.warnings.push_back(in.name + ": rejected " + r.layer + " record " + r.record_id + ": " + r.reason);
    }
  }

  refine::RefineData& data = out.data;
  data.clusters = clusters::read_clusters(manifest.clusters);
  for (const auto& c : data.clusters) {
    if (!country_index.count(c.country)) {
      throw DataError("cluster " + c.cluster_id + " belongs to country '" + c.country + "', absent from the manifest");
    }
  }

  std::vector<refine::PlaceRecord> places;
  std::map<std::string, std::size_t> tile_of;
  for (std::size_t ci = 0; ci < out.countries.size(); ++ci) {
    const CountryData& cd = out.countries[ci];
    const osm::FeatureExtractor fx(cd.layers, cd.luminosity ? &*cd.luminosity : nullptr, &cd.population);
    std::vector<geo::GeoPoint> at;
    for (const auto& p : cd.registry) at.push_back(p.location);
    auto features = fx.extract_all(at);
    for (std::size_t i = 0; i < cd.registry.size(); ++i) {
      places.push_back({cd.registry[i].place_id, cd.inputs.name, cd.registry[i].location, features[i], std::nullopt});
    }

    // Candidates for this country's clusters.
    const spatial::PointIndex index(at);
    std::vector<std::size_t> mine;
    for (std::size_t k = 0; k < data.clusters.size(); ++k) {
      if (data.clusters[k].country == cd.inputs.name) mine.push_back(k);
    }
    std::vector<clusters::CandidateSet> sets(mine.size());
    parallel_for(mine.size(), [&](std::size_t j) {
      sets[j] = clusters::assign_candidates(data.clusters[mine[j]], cd.registry, index, &cd.population);
    });
    std::vector<geo::GeoPoint> fallback_at;
    std::vector<std::string> fallback_ids;
    for (const auto& s : sets) {
      if (s.provenance != clusters::Provenance::kQuadrantFallback) continue;
      for (const auto& c : s.candidates) {
        fallback_at.push_back(c.location);
        fallback_ids.push_back(c.place_id);
      }
    }
    const auto fb = fx.extract_all(fallback_at);
    for (std::size_t i = 0; i < fb.size(); ++i) {
      places.push_back({fallback_ids[i], cd.inputs.name, fallback_at[i], fb[i], std::nullopt});
    }
    for (std::size_t j = 0; j < mine.size(); ++j) {
      if (sets[j].candidates.empty()) {
        out.warnings.push_back("cluster " + data.clusters[mine[j]].cluster_id + " has no candidate place");
      }
    }
    data.candidates.resize(data.clusters.size());
    for (std::size_t j = 0; j < mine.size(); ++j) data.candidates[mine[j]] = std::move(sets[j]);

    if (!cd.inputs.tiles.empty()) {
      const auto entries = imgcls::read_tile_manifest(cd.inputs.tiles);
      const std::size_t first = data.tiles.size();
      data.tiles.resize(first + entries.size());
      parallel_for(entries.size(), [&](std::size_t i) {
        data.tiles[first + i] = imgcls::read_tile(entries[i].path, entries[i].place_id);
      });
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& t = data.tiles[first + i];
        if (t.size != manifest.refine.arch.input_size) {
          throw DataError("tile " + entries[i].path.string() + " is " + std::to_string(t.size) +
                          " px; the image model expects " + std::to_string(manifest.refine.arch.input_size));
        }
        if (!tile_of.emplace(entries[i].place_id, first + i).second) {
          throw DataError("tile listed twice for place " + entries[i].place_id);
        }
      }
    }
  }

  std::sort(places.begin(), places.end(),
            [](const refine::PlaceRecord& a, const refine::PlaceRecord& b) { return a.place_id < b.place_id; });
  for (std::size_t i = 1; i < places.size(); ++i) {
    if (places[i].place_id == places[i - 1].place_id) throw DataError("duplicate place id " + places[i].place_id);
  }
  std::size_t unmatched = tile_of.size();
  for (auto& p : places) {
    auto it = tile_of.find(p.place_id);
    if (it != tile_of.end()) {
      p.tile = it->second;
      --unmatched;
    }
  }
  if (unmatched) out.warnings.push_back(std::to_string(unmatched) + " tiles name places absent from the registry");
  data.places = std::move(places);
  data.validate();
  return out;
}

}  // namespace povmap::pipeline
