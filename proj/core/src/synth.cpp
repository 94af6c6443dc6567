#include "povmap/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"
#include "povmap/gbt.hpp"
#include "povmap/parallel.hpp"
#include "povmap/random.hpp"
#include "povmap/spatial_index.hpp"
#include "povmap/tile.hpp"
#include "povmap/validate.hpp"

namespace povmap::synth {

using nlohmann::json;

std::size_t SynthSpec::clusters_for(std::size_t country) const {
  return country < cluster_counts.size() ? cluster_counts[country] : clusters_per_country;
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw UsageError("synth spec: " + m); };
  if (countries < 2) fail("at least 2 countries are needed");
  if (places_per_country < 4) fail("places_per_country must be >= 4");
  if (!cluster_counts.empty() && cluster_counts.size() != countries) fail("cluster_counts needs one entry per country");
  for (std::size_t c = 0; c < countries; ++c) {
    if (clusters_for(c) < 2) fail("every country needs at least 2 clusters");
    if (clusters_for(c) > places_per_country) fail("more clusters than places in a country");
  }
  if (!(sigma >= 0.0)) fail("sigma must be >= 0");
  if (!(country_span_deg > 0.0 && country_span_deg <= 5.0)) fail("country_span_deg must lie in (0, 5]");
  if (!(min_place_spacing_m >= 1500.0)) fail("min_place_spacing_m must be >= 1500");
  if (!(bump_radius_km > 0.0)) fail("bump_radius_km must be > 0");
  if (!(base_min <= base_max)) fail("base_min exceeds base_max");
  const Densities& d = densities;
  for (double v : {d.streets_per_wealth, d.buildings_per_wealth, d.building_side_per_wealth_m, d.poi_rate, d.pop_base,
                   d.pop_per_wealth, d.lum_per_wealth, d.lum_floor_wealth}) {
    if (!(v >= 0.0)) fail("densities must be non-negative");
  }
  if (!(d.street_spacing_m > 0.0) || !(d.building_side_base_m > 0.0)) fail("street spacing and building side must be > 0");
  if (!(list_b_fraction >= 0.0 && list_b_fraction <= 1.0)) fail("list_b_fraction must lie in [0, 1]");
  if (!(list_b_jitter_m >= 0.0 && list_b_jitter_m < places::kMergeDistanceM)) fail("list_b_jitter_m must lie in [0, 1000)");
  if (tile_size < 8) fail("tile_size must be >= 8");
  if (!(tile_extent_m > 0.0) || !(tile_noise >= 0.0)) fail("tile extent must be > 0 and noise >= 0");
  if (!(pop_cellsize_deg > 0.0) || !(lum_cellsize_deg > 0.0)) fail("cell sizes must be > 0");
  // Rough packing bound for the minimum spacing.
  const double side_m = country_span_deg * geo::kMetersPerDegree;
  const double capacity = side_m * side_m / (min_place_spacing_m * min_place_spacing_m);
  if (static_cast<double>(places_per_country + list_b_extra) > 0.5 * capacity) {
    fail("too many places for the country extent and spacing");
  }
}

namespace {

template <typename T>
void read_field(const json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("synth spec: field '") + key + "' has the wrong type");
  }
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("synth spec: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("synth spec: expected a JSON object");
  SynthSpec s;
  read_field(doc, "countries", s.countries);
  read_field(doc, "places_per_country", s.places_per_country);
  read_field(doc, "clusters_per_country", s.clusters_per_country);
  read_field(doc, "cluster_counts", s.cluster_counts);
  read_field(doc, "country_span_deg", s.country_span_deg);
  read_field(doc, "min_place_spacing_m", s.min_place_spacing_m);
  read_field(doc, "bumps", s.bumps);
  read_field(doc, "bump_radius_km", s.bump_radius_km);
  read_field(doc, "bump_amplitude", s.bump_amplitude);
  read_field(doc, "base_min", s.base_min);
  read_field(doc, "base_max", s.base_max);
  read_field(doc, "sigma", s.sigma);
  read_field(doc, "urban_wealth", s.urban_wealth);
  read_field(doc, "list_b_fraction", s.list_b_fraction);
  read_field(doc, "list_b_jitter_m", s.list_b_jitter_m);
  read_field(doc, "list_b_extra", s.list_b_extra);
  read_field(doc, "tile_size", s.tile_size);
  read_field(doc, "tile_extent_m", s.tile_extent_m);
  read_field(doc, "tile_noise", s.tile_noise);
  read_field(doc, "pop_cellsize_deg", s.pop_cellsize_deg);
  read_field(doc, "lum_cellsize_deg", s.lum_cellsize_deg);
  read_field(doc, "seed", s.seed);
  if (doc.contains("densities")) {
    const json& d = doc["densities"];
    if (!d.is_object()) throw UsageError("synth spec: 'densities' must be an object");
    Densities& o = s.densities;
    read_field(d, "streets_per_wealth", o.streets_per_wealth);
    read_field(d, "street_spacing_m", o.street_spacing_m);
    read_field(d, "buildings_per_wealth", o.buildings_per_wealth);
    read_field(d, "building_side_base_m", o.building_side_base_m);
    read_field(d, "building_side_per_wealth_m", o.building_side_per_wealth_m);
    read_field(d, "poi_rate", o.poi_rate);
    read_field(d, "pop_base", o.pop_base);
    read_field(d, "pop_per_wealth", o.pop_per_wealth);
    read_field(d, "lum_per_wealth", o.lum_per_wealth);
    read_field(d, "lum_floor_wealth", o.lum_floor_wealth);
  }
  s.validate();
  return s;
}

std::string format_synth_spec(const SynthSpec& s) {
  const Densities& d = s.densities;
  json doc = {{"countries", s.countries},
              {"places_per_country", s.places_per_country},
              {"clusters_per_country", s.clusters_per_country},
              {"cluster_counts", s.cluster_counts},
              {"country_span_deg", s.country_span_deg},
              {"min_place_spacing_m", s.min_place_spacing_m},
              {"bumps", s.bumps},
              {"bump_radius_km", s.bump_radius_km},
              {"bump_amplitude", s.bump_amplitude},
              {"base_min", s.base_min},
              {"base_max", s.base_max},
              {"sigma", s.sigma},
              {"urban_wealth", s.urban_wealth},
              {"list_b_fraction", s.list_b_fraction},
              {"list_b_jitter_m", s.list_b_jitter_m},
              {"list_b_extra", s.list_b_extra},
              {"tile_size", s.tile_size},
              {"tile_extent_m", s.tile_extent_m},
              {"tile_noise", s.tile_noise},
              {"pop_cellsize_deg", s.pop_cellsize_deg},
              {"lum_cellsize_deg", s.lum_cellsize_deg},
              {"seed", s.seed},
              {"densities",
               {{"streets_per_wealth", d.streets_per_wealth},
                {"street_spacing_m", d.street_spacing_m},
                {"buildings_per_wealth", d.buildings_per_wealth},
                {"building_side_base_m", d.building_side_base_m},
                {"building_side_per_wealth_m", d.building_side_per_wealth_m},
                {"poi_rate", d.poi_rate},
                {"pop_base", d.pop_base},
                {"pop_per_wealth", d.pop_per_wealth},
                {"lum_per_wealth", d.lum_per_wealth},
                {"lum_floor_wealth", d.lum_floor_wealth}}}};
  return doc.dump(2) + "\n";
}

double WealthField::at(const geo::GeoPoint& p) const {
  double w = base;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const auto xy = geo::project_local(centers[j], p);
    const double d2 = xy.x * xy.x + xy.y * xy.y;
    w += amplitudes[j] * std::exp(-d2 / (2.0 * radius_m * radius_m));
  }
  return std::clamp(w, 0.0, 100.0);
}

namespace {

std::string pad(std::size_t i, int width) {
  std::ostringstream s;
  s << std::setw(width) << std::setfill('0') << i;
  return s.str();
}

// Layer geometry near a tile, in local meters around the tile center.
struct TileScene {
  struct Line {
    spatial::Segment seg;  ///< endpoints as (lat, lon) = (y, x) meters
    bool paved;
  };
  struct Box {
    double x, y, side;
  };
  std::vector<Line> lines;
  std::vector<Box> buildings;
};

rasters::RasterGrid empty_grid(const geo::BBox& bounds, double margin, double cellsize) {
  rasters::RasterGrid g;
  g.cellsize = cellsize;
  g.xll = bounds.min_lon - margin;
  g.yll = bounds.min_lat - margin;
  g.ncols = static_cast<std::size_t>(std::ceil((bounds.lon_span() + 2 * margin) / cellsize));
  g.nrows = static_cast<std::size_t>(std::ceil((bounds.lat_span() + 2 * margin) / cellsize));
  g.values.assign(g.ncols * g.nrows, 0.0);
  return g;
}

// Calls fn(row, col, d2) for pixels within radius_m of p.
template <typename Fn>
void for_pixels_near(const rasters::RasterGrid& g, const geo::GeoPoint& p, double radius_m, Fn&& fn) {
  const double dlat = radius_m / geo::kMetersPerDegree;
  const double dlon = dlat / std::max(0.1, std::cos(p.lat * std::numbers::pi / 180.0));
  const double top = g.yll + static_cast<double>(g.nrows) * g.cellsize;
  const auto clamp_idx = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n)));
  };
  const std::size_t r0 = clamp_idx(std::floor((top - (p.lat + dlat)) / g.cellsize), g.nrows);
  const std::size_t r1 = clamp_idx(std::ceil((top - (p.lat - dlat)) / g.cellsize), g.nrows);
  const std::size_t c0 = clamp_idx(std::floor((p.lon - dlon - g.xll) / g.cellsize), g.ncols);
  const std::size_t c1 = clamp_idx(std::ceil((p.lon + dlon - g.xll) / g.cellsize), g.ncols);
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      const auto xy = geo::project_local(p, g.pixel_center(r, c));
      const double d2 = xy.x * xy.x + xy.y * xy.y;
      if (d2 <= radius_m * radius_m) fn(r, c, d2);
    }
  }
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = ax + t * dx - px, ey = ay + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

imgcls::Tile render_tile(const SynthSpec& spec, const std::string& id, double wealth, const TileScene& scene,
                         std::uint64_t seed) {
  imgcls::Tile t = imgcls::blank_tile(id, spec.tile_size);
  const std::size_t n = spec.tile_size;
  const double scale = spec.tile_extent_m / static_cast<double>(n);
  const double half = spec.tile_extent_m / 2.0;
  const double f = wealth / 100.0;
  const std::array<double, 3> poor{0.62, 0.46, 0.30}, rich{0.30, 0.44, 0.38};
  std::array<double, 3> base{};
  for (std::size_t ch = 0; ch < 3; ++ch) base[ch] = poor[ch] + f * (rich[ch] - poor[ch]);
  const std::array<double, 3> paved{0.50, 0.50, 0.52}, unpaved{0.72, 0.58, 0.42}, roof{0.92, 0.90, 0.86};

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = half - (static_cast<double>(r) + 0.5) * scale;
    for (std::size_t c = 0; c < n; ++c) {
      const double x = (static_cast<double>(c) + 0.5) * scale - half;
      const std::array<double, 3>* paint = nullptr;
      for (const auto& l : scene.lines) {
        if (segment_distance(x, y, l.seg.a.lon, l.seg.a.lat, l.seg.b.lon, l.seg.b.lat) <= scale / 2) {
          paint = l.paved ? &paved : &unpaved;
          break;
        }
      }
      for (const auto& b : scene.buildings) {
        const double h = std::max(b.side / 2.0, scale);
        if (std::abs(x - b.x) <= h && std::abs(y - b.y) <= h) paint = &roof;
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = (paint ? (*paint)[ch] : base[ch]) + spec.tile_noise * noise(rng);
        t.at(ch, r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return t;
}

CountryWorld make_country(const SynthSpec& spec, std::size_t index) {
  Rng rng(derive_seed(spec.seed, "country-" + std::to_string(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Densities& d = spec.densities;

  CountryWorld w;
  w.name = "C" + std::to_string(index + 1);
  const double lat0 = -12.0 + 1.0 * static_cast<double>(index);
  const double lon0 = 15.0 + 1.0 * static_cast<double>(index);
  w.bounds = {lat0, lat0 + spec.country_span_deg, lon0, lon0 + spec.country_span_deg};
  auto random_point = [&] {
    const double lat = w.bounds.min_lat + unit(rng) * w.bounds.lat_span();
    const double lon = w.bounds.min_lon + unit(rng) * w.bounds.lon_span();
    return geo::make_point(lat, lon);
  };

  WealthField field;
  field.base = spec.base_min + unit(rng) * (spec.base_max - spec.base_min);
  field.radius_m = spec.bump_radius_km * 1000.0;
  for (std::size_t j = 0; j < spec.bumps; ++j) {
    field.centers.push_back(random_point());
    field.amplitudes.push_back(spec.bump_amplitude * (unit(rng) * 1.5 - 0.5));
  }

  std::vector<geo::GeoPoint> taken;
  auto sample_place = [&] {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const geo::GeoPoint p = random_point();
      bool ok = true;
      for (const auto& q : taken) {
        if (geo::haversine_m(p, q) < spec.min_place_spacing_m) {
          ok = false;
          break;
        }
      }
      if (ok) {
        taken.push_back(p);
        return p;
      }
    }
    throw UsageError("synth spec: cannot fit the requested places in " + w.name);
  };
  const double mid_lat = (w.bounds.min_lat + w.bounds.max_lat) / 2;
  const double mid_lon = (w.bounds.min_lon + w.bounds.max_lon) / 2;
  auto make_place = [&](std::string id, const geo::GeoPoint& p, places::Source src) {
    places::PopulatedPlace pp;
    pp.place_id = id;
    pp.source = src;
    pp.names.push_back("Place " + id);
    pp.location = p;
    pp.admin1 = w.name + (p.lat >= mid_lat ? "-North" : "-South");
    pp.admin2 = pp.admin1 + (p.lon >= mid_lon ? "-East" : "-West");
    return pp;
  };

  for (std::size_t i = 0; i < spec.places_per_country; ++i) {
    const std::string id = w.name + "-a" + pad(i, 4);
    const geo::GeoPoint p = sample_place();
    w.list_a.push_back(make_place(id, p, places::Source::kListA));
    w.truth.push_back({id, p, field.at(p)});
  }
  std::size_t b_index = 0;
  for (const auto& a : w.list_a) {
    if (unit(rng) >= spec.list_b_fraction) continue;
    const geo::GeoPoint p = geo::destination(a.location, unit(rng) * 360.0, unit(rng) * spec.list_b_jitter_m);
    auto pp = make_place(w.name + "-b" + pad(b_index++, 4), p, places::Source::kListB);
    pp.names = a.names;
    w.list_b.push_back(std::move(pp));
  }
  for (std::size_t i = 0; i < spec.list_b_extra; ++i) {
    const std::string id = w.name + "-b" + pad(b_index++, 4);
    const geo::GeoPoint p = sample_place();
    w.list_b.push_back(make_place(id, p, places::Source::kListB));
    w.truth.push_back({id, p, field.at(p)});
  }

  // Layers: a street grid and buildings around every place, POIs nearby,
  // and straight primary roads linking each place to its nearest predecessor.
  std::size_t way_n = 0, building_n = 0, poi_n = 0;
  for (std::size_t i = 0; i < w.truth.size(); ++i) {
    const TruePlace& tp = w.truth[i];
    const auto n = static_cast<std::size_t>(1 + std::floor(tp.wealth * d.streets_per_wealth));
    std::vector<double> offsets;
    for (std::size_t j = 0; j <= n + 1; ++j) {
      offsets.push_back((static_cast<double>(j) - 1.0 - (static_cast<double>(n) - 1.0) / 2.0) * d.street_spacing_m);
    }
    std::vector<double> lats, lons;
    for (double o : offsets) {
      lats.push_back(geo::unproject_local(tp.location, {0.0, o}).lat);
      lons.push_back(geo::unproject_local(tp.location, {o, 0.0}).lon);
    }
    for (int axis = 0; axis < 2; ++axis) {
      for (std::size_t j = 1; j <= n; ++j) {
        osm::Way way;
        way.way_id = w.name + "-w" + pad(way_n++, 6);
        way.highway = osm::RoadClass::kTertiary;
        const bool is_paved = unit(rng) * 100.0 < tp.wealth;
        way.surface = is_paved ? osm::Surface::kPaved : osm::Surface::kUnpaved;
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          way.points.push_back(axis == 0 ? geo::GeoPoint{lats[j], lons[k]} : geo::GeoPoint{lats[k], lons[j]});
        }
        w.layers.ways.push_back(std::move(way));
      }
    }
    const auto nb = static_cast<std::size_t>(1 + std::floor(tp.wealth * d.buildings_per_wealth));
    const double side = d.building_side_base_m + tp.wealth * d.building_side_per_wealth_m;
    for (std::size_t b = 0; b < nb; ++b) {
      const double x = (unit(rng) * 2 - 1) * 350.0, y = (unit(rng) * 2 - 1) * 350.0;
      const double h = side / 2;
      std::vector<geo::GeoPoint> ring;
      for (auto [dx, dy] : {std::pair{-h, -h}, {h, -h}, {h, h}, {-h, h}, {-h, -h}}) {
        ring.push_back(geo::unproject_local(tp.location, {x + dx, y + dy}));
      }
      ring.back() = ring.front();
      w.layers.buildings.push_back(osm::make_building(w.name + "-h" + pad(building_n++, 6), std::move(ring)));
    }
    for (std::size_t k = 0; k < osm::kPoiCategoryCount; ++k) {
      const double lambda = d.poi_rate * static_cast<double>(1 + k % 3) * tp.wealth / 10.0;
      const int count = lambda > 0 ? std::poisson_distribution<int>(lambda)(rng) : 0;
      for (int m = 0; m < count; ++m) {
        const geo::GeoPoint p = geo::destination(tp.location, unit(rng) * 360.0, unit(rng) * 500.0);
        w.layers.pois.push_back({w.name + "-p" + pad(poi_n++, 6), p, static_cast<std::uint8_t>(k)});
      }
    }
    if (i > 0) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < i; ++j) {
        const double dist = geo::haversine_m(tp.location, w.truth[j].location);
        if (dist < best_d) {
          best_d = dist;
          best = j;
        }
      }
      osm::Way link;
      link.way_id = w.name + "-w" + pad(way_n++, 6);
      link.highway = osm::RoadClass::kPrimary;
      link.surface = (tp.wealth + w.truth[best].wealth) / 2 > 50 ? osm::Surface::kPaved : osm::Surface::kUnpaved;
      link.points = {tp.location, w.truth[best].location};
      w.layers.ways.push_back(std::move(link));
    }
  }

  // Grids.
  w.population = empty_grid(w.bounds, 0.1, spec.pop_cellsize_deg);
  w.luminosity = empty_grid(w.bounds, 0.1, spec.lum_cellsize_deg);
  for (const auto& tp : w.truth) {
    const double total = d.pop_base + d.pop_per_wealth * tp.wealth;
    const double sd = 250.0 + 3.0 * tp.wealth;
    std::vector<std::pair<std::size_t, double>> cells;
    double mass = 0.0;
    for_pixels_near(w.population, tp.location, 3 * sd, [&](std::size_t r, std::size_t c, double d2) {
      const double v = std::exp(-d2 / (2 * sd * sd));
      cells.emplace_back(r * w.population.ncols + c, v);
      mass += v;
    });
    for (const auto& [idx, v] : cells) w.population.values[idx] += total * v / mass;

    const double light = d.lum_per_wealth * std::max(0.0, tp.wealth - d.lum_floor_wealth);
    if (light > 0) {
      const double lsd = 600.0;
      for_pixels_near(w.luminosity, tp.location, 3 * lsd, [&](std::size_t r, std::size_t c, double d2) {
        w.luminosity.at(r, c) += light * std::exp(-d2 / (2 * lsd * lsd));
      });
    }
  }
  for (double& v : w.population.values) v = std::round(v);
  for (double& v : w.luminosity.values) v = v < 0.05 ? 0.0 : std::round(v * 100.0) / 100.0;

  // Clusters at a random subset of listed places, displaced and noised.
  std::vector<std::size_t> order(w.truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(spec.clusters_for(index));
  std::sort(order.begin(), order.end());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const TruePlace& tp = w.truth[order[k]];
    clusters::SurveyCluster c;
    c.cluster_id = w.name + "-c" + pad(k, 4);
    c.country = w.name;
    c.urban = tp.wealth >= spec.urban_wealth;
    const double limit = c.urban ? clusters::kUrbanRadiusM : clusters::kRuralRadiusM;
    const double bearing = unit(rng) * 360.0;
    const double dist = unit(rng) * 0.999 * limit;
    c.location = geo::destination(tp.location, bearing, dist);
    const double z = gauss(rng);
    c.iwi = std::clamp(tp.wealth + spec.sigma * z, 0.0, 100.0);
    w.cluster_truth.push_back({c.cluster_id, tp.place_id, tp.location, geo::haversine_m(tp.location, c.location),
                               tp.wealth});
    w.clusters.push_back(std::move(c));
  }

  // The registry build adds places from the population grid; they get tiles
  // too, so every registry place has imagery.
  const auto registry = places::merge_places(w.list_a, w.list_b);
  for (const auto& p : places::extract_raster_places(w.population, w.population.bounds(), registry, w.name + "-R")) {
    w.truth.push_back({p.place_id, p.location, field.at(p.location)});
  }

  std::vector<spatial::Segment> segments;
  std::vector<bool> segment_paved;
  for (const auto& way : w.layers.ways) {
    for (std::size_t k = 1; k < way.points.size(); ++k) {
      segments.push_back({way.points[k - 1], way.points[k]});
      segment_paved.push_back(way.surface == osm::Surface::kPaved);
    }
  }
  const spatial::SegmentIndex segment_index(segments);
  std::vector<geo::GeoPoint> centroids;
  for (const auto& b : w.layers.buildings) centroids.push_back(b.centroid);
  const spatial::PointIndex building_index(centroids);

  w.tiles.resize(w.truth.size());
  const std::uint64_t tile_seed = derive_seed(spec.seed, "tiles-" + std::to_string(index));
  parallel_for(w.truth.size(), [&](std::size_t i) {
    const TruePlace& tp = w.truth[i];
    const geo::BBox box = geo::box_around(tp.location, spec.tile_extent_m * 1.1);
    TileScene scene;
    for (std::size_t k : segment_index.overlapping(box)) {
      const auto a = geo::project_local(tp.location, segments[k].a);
      const auto b = geo::project_local(tp.location, segments[k].b);
      scene.lines.push_back({{{a.y, a.x}, {b.y, b.x}}, segment_paved[k]});
    }
    for (std::size_t k : building_index.within_box(box)) {
      const auto c = geo::project_local(tp.location, centroids[k]);
      scene.buildings.push_back({c.x, c.y, std::sqrt(w.layers.buildings[k].area_m2)});
    }
    w.tiles[i] = render_tile(spec, tp.place_id, tp.wealth, scene, derive_seed(tile_seed, i));
  });
  return w;
}

}  // namespace

World generate(const SynthSpec& spec) {
  spec.validate();
  World world;
  world.spec = spec;
  world.countries.resize(spec.countries);
  parallel_for(spec.countries, [&](std::size_t c) { world.countries[c] = make_country(spec, c); });
  return world;
}

std::filesystem::path write_world(const World& world, const std::filesystem::path& dir, std::string_view pipeline_json) {
  json pipeline;
  try {
    pipeline = json::parse(pipeline_json);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("synth: pipeline settings are not valid JSON: ") + e.what());
  }
  if (!pipeline.is_object()) throw UsageError("synth: pipeline settings must be a JSON object");

  std::ostringstream truth, ctruth;
  write_csv_row(truth, {"place_id", "country", "lat", "lon", "wealth"});
  write_csv_row(ctruth, {"cluster_id", "country", "place_id", "true_lat", "true_lon", "lat", "lon", "urban",
                         "displacement_m", "wealth", "iwi"});
  std::vector<clusters::SurveyCluster> all_clusters;
  json countries = json::array();
  for (const auto& cw : world.countries) {
    const std::filesystem::path cdir = dir / cw.name;
    write_text_file(cdir / "list_a.csv", places::format_place_list(cw.list_a));
    write_text_file(cdir / "list_b.csv", places::format_place_list(cw.list_b));
    rasters::write_grid(cw.population, cdir / "population.asc");
    rasters::write_grid(cw.luminosity, cdir / "luminosity.asc");
    write_text_file(cdir / "ways.geojson", osm::format_ways(cw.layers.ways));
    write_text_file(cdir / "pois.csv", osm::format_pois(cw.layers.pois));
    write_text_file(cdir / "buildings.geojson", osm::format_buildings(cw.layers.buildings));
    std::filesystem::create_directories(cdir / "tiles");
    std::vector<imgcls::TileEntry> entries(cw.tiles.size());
    parallel_for(cw.tiles.size(), [&](std::size_t i) {
      entries[i] = {cw.tiles[i].place_id, cdir / "tiles" / (cw.tiles[i].place_id + ".png")};
      imgcls::write_png(cw.tiles[i], entries[i].path);
    });
    write_text_file(cdir / "tiles.csv", imgcls::format_tile_manifest(entries, cdir));
    for (const auto& tp : cw.truth) {
      write_csv_row(truth, {tp.place_id, cw.name, format_double(tp.location.lat), format_double(tp.location.lon),
                            format_double(tp.wealth)});
    }
    for (std::size_t k = 0; k < cw.clusters.size(); ++k) {
      const auto& c = cw.clusters[k];
      const auto& t = cw.cluster_truth[k];
      write_csv_row(ctruth, {c.cluster_id, c.country, t.place_id, format_double(t.true_location.lat),
                             format_double(t.true_location.lon), format_double(c.location.lat),
                             format_double(c.location.lon), c.urban ? "1" : "0", format_double(t.displacement_m),
                             format_double(t.wealth), format_double(c.iwi)});
      all_clusters.push_back(c);
    }
    const std::string rel = cw.name + "/";
    countries.push_back({{"name", cw.name},
                         {"list_a", rel + "list_a.csv"},
                         {"list_b", rel + "list_b.csv"},
                         {"population", rel + "population.asc"},
                         {"luminosity", rel + "luminosity.asc"},
                         {"ways", rel + "ways.geojson"},
                         {"pois", rel + "pois.csv"},
                         {"buildings", rel + "buildings.geojson"},
                         {"tiles", rel + "tiles.csv"}});
  }
  write_text_file(dir / "clusters.csv", clusters::format_clusters(all_clusters));
  write_text_file(dir / "ground_truth.csv", truth.str());
  write_text_file(dir / "cluster_truth.csv", ctruth.str());
  write_text_file(dir / "synth_spec.json", format_synth_spec(world.spec));

  json manifest = {{"seed", world.spec.seed}, {"output_dir", "out"}, {"clusters", "clusters.csv"},
                   {"countries", countries}};
  for (auto it = pipeline.begin(); it != pipeline.end(); ++it) manifest[it.key()] = it.value();
  const auto path = dir / "manifest.json";
  write_text_file(path, manifest.dump(2) + "\n");
  return path;
}

CeilingResult ceiling(const World& world, std::uint64_t seed) {
  std::vector<std::string> ids, countries;
  std::vector<double> y;
  std::vector<std::vector<double>> rows;
  for (const auto& cw : world.countries) {
    const osm::FeatureExtractor fx(cw.layers, &cw.luminosity, &cw.population);
    std::vector<geo::GeoPoint> at;
    for (const auto& t : cw.cluster_truth) at.push_back(t.true_location);
    const auto fvs = fx.extract_all(at);
    for (std::size_t k = 0; k < cw.clusters.size(); ++k) {
      ids.push_back(cw.clusters[k].cluster_id);
      countries.push_back(cw.name);
      y.push_back(cw.clusters[k].iwi);
      const auto a = fvs[k].active();
      rows.emplace_back(a.begin(), a.end());
    }
  }
  const gbt::Matrix x = gbt::Matrix::from_rows(rows);
  gbt::GbtConfig config;
  config.seed = seed;
  const auto trainer = [&](const validate::Fold& fold) {
    const gbt::GbtModel m = gbt::train(x, y, config, fold.train);
    std::vector<double> out;
    for (std::size_t i : fold.test) out.push_back(m.predict(rows[i]));
    return out;
  };
  const auto rep = validate::pooled_eval(ids, countries, y, 5, seed, trainer, validate::Metric::kPearson2);
  return {rep.mean, ids.size()};
}

}  // namespace povmap::synth
