#include "povmap/osm_features.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"
#include "povmap/parallel.hpp"

namespace povmap::osm {

std::vector<geo::GeoPoint> detect_junctions(std::span<const Way> ways) {
  struct Touch {
    std::set<std::size_t> interior;
    std::set<std::size_t> endpoint;
  };
  std::map<std::pair<double, double>, Touch> nodes;
  for (std::size_t w = 0; w < ways.size(); ++w) {
    const auto& pts = ways[w].points;
    if (pts.empty()) continue;
    nodes[{pts.front().lat, pts.front().lon}].endpoint.insert(w);
    nodes[{pts.back().lat, pts.back().lon}].endpoint.insert(w);
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) nodes[{pts[i].lat, pts[i].lon}].interior.insert(w);
  }
  std::vector<geo::GeoPoint> out;
  for (const auto& [key, touch] : nodes) {
    if (touch.interior.size() >= 2 || touch.endpoint.size() >= 3) out.push_back({key.first, key.second});
  }
  return out;
}

std::optional<std::pair<geo::GeoPoint, geo::GeoPoint>> clip_segment(const geo::GeoPoint& a, const geo::GeoPoint& b,
                                                                     const geo::BBox& box) {
  // Liang-Barsky in (lon, lat) parameter space.
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.lon - a.lon;
  const double dy = b.lat - a.lat;
  const std::array<double, 4> p{-dx, dx, -dy, dy};
  const std::array<double, 4> q{a.lon - box.min_lon, box.max_lon - a.lon, a.lat - box.min_lat, box.max_lat - a.lat};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      if (t > t1) return std::nullopt;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return std::nullopt;
      t1 = std::min(t1, t);
    }
  }
  const geo::GeoPoint c0 = t0 == 0.0 ? a : geo::GeoPoint{a.lat + t0 * dy, a.lon + t0 * dx};
  const geo::GeoPoint c1 = t1 == 1.0 ? b : geo::GeoPoint{a.lat + t1 * dy, a.lon + t1 * dx};
  return std::make_pair(c0, c1);
}

namespace {

void add_length(RoadStats& s, Surface surface, double m) {
  s.total_m += m;
  switch (surface) {
    case Surface::kPaved: s.paved_m += m; break;
    case Surface::kUnpaved: s.unpaved_m += m; break;
    case Surface::kUnknown: s.unknown_m += m; break;
  }
}

}  // namespace

RoadStats road_stats(std::span<const Way> ways, const geo::BBox& cell) {
  RoadStats s;
  for (const auto& w : ways) {
    for (std::size_t i = 0; i + 1 < w.points.size(); ++i) {
      if (auto clipped = clip_segment(w.points[i], w.points[i + 1], cell)) {
        add_length(s, w.surface, geo::haversine_m(clipped->first, clipped->second));
      }
    }
  }
  return s;
}

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> n;
    n[kColRoadTotal] = "road_length_total";
    n[kColRoadPaved] = "road_length_paved";
    n[kColRoadUnpaved] = "road_length_unpaved";
    n[kColRoadUnknown] = "road_length_unknown";
    n[kColDistRoad] = "dist_nearest_road";
    n[kColJunctionCount] = "junction_count";
    n[kColDistJunction] = "dist_nearest_junction";
    n[kColBuildingCount] = "building_count";
    n[kColBuildingArea] = "building_area_m2";
    for (std::size_t c = 0; c < kPoiCategoryCount; ++c) {
      n[kColPoiBegin + 2 * c] = "poi_count_" + std::string(kPoiCategories[c]);
      n[kColPoiBegin + 2 * c + 1] = "poi_dist_" + std::string(kPoiCategories[c]);
    }
    const std::array<std::string, 3> win{"1p6", "5", "10"};
    const std::array<std::string, 6> stat{"max", "mean", "median", "zero_ratio", "upper_third_mean",
                                          "lower_third_mean"};
    for (std::size_t w = 0; w < 3; ++w) {
      for (std::size_t s = 0; s < 6; ++s) n[kColLumBegin + 6 * w + s] = "lum_" + stat[s] + "_" + win[w];
      n[kColPopBegin + w] = "pop_" + win[w];
    }
    n[kColImageBegin + 0] = "img_prob_poor";
    n[kColImageBegin + 1] = "img_prob_lower_middle";
    n[kColImageBegin + 2] = "img_prob_upper_middle";
    n[kColImageBegin + 3] = "img_prob_rich";
    return n;
  }();
  return names;
}

void FeatureVector::set_image_probs(std::span<const double, 4> probs) {
  std::copy(probs.begin(), probs.end(), values.begin() + kColImageBegin);
  has_image_probs = true;
}

FeatureExtractor::FeatureExtractor(const LayerSet& layers, const rasters::RasterGrid* luminosity,
                                   const rasters::RasterGrid* population)
    : layers_(layers), luminosity_(luminosity), population_(population) {
  std::vector<spatial::Segment> segments;
  for (const auto& w : layers.ways) {
    for (std::size_t i = 0; i + 1 < w.points.size(); ++i) {
      segments.push_back({w.points[i], w.points[i + 1]});
      segment_surface_.push_back(w.surface);
    }
  }
  roads_ = spatial::SegmentIndex(std::move(segments));
  junctions_ = detect_junctions(layers.ways);
  junction_index_ = spatial::PointIndex(junctions_);

  std::vector<geo::GeoPoint> centroids;
  centroids.reserve(layers.buildings.size());
  for (const auto& b : layers.buildings) centroids.push_back(b.centroid);
  building_index_ = spatial::PointIndex(std::move(centroids));

  std::array<std::vector<geo::GeoPoint>, kPoiCategoryCount> by_cat;
  for (const auto& p : layers.pois) by_cat[p.category].push_back(p.location);
  for (std::size_t c = 0; c < kPoiCategoryCount; ++c) poi_index_[c] = spatial::PointIndex(std::move(by_cat[c]));
}

FeatureVector FeatureExtractor::extract(const geo::GeoPoint& location) const {
  FeatureVector fv;
  auto& v = fv.values;
  const auto& windows = geo::WindowSpec::standard();
  const geo::BBox cell = geo::cell_window(location, windows[0]);

  RoadStats roads;
  for (std::size_t i : roads_.overlapping(cell)) {
    const auto& s = roads_.segment(i);
    if (auto clipped = clip_segment(s.a, s.b, cell)) {
      add_length(roads, segment_surface_[i], geo::haversine_m(clipped->first, clipped->second));
    }
  }
  v[kColRoadTotal] = roads.total_m;
  v[kColRoadPaved] = roads.paved_m;
  v[kColRoadUnpaved] = roads.unpaved_m;
  v[kColRoadUnknown] = roads.unknown_m;
  v[kColDistRoad] = roads_.empty() ? kDistanceCapM : roads_.nearest(location).meters;

  v[kColJunctionCount] = static_cast<double>(junction_index_.count_in_box(cell));
  v[kColDistJunction] = junction_index_.empty() ? kDistanceCapM : junction_index_.nearest(location).meters;

  double area = 0.0;
  const auto in_cell = building_index_.within_box(cell);
  for (std::size_t i : in_cell) area += layers_.buildings[i].area_m2;
  v[kColBuildingCount] = static_cast<double>(in_cell.size());
  v[kColBuildingArea] = area;

  for (std::size_t c = 0; c < kPoiCategoryCount; ++c) {
    const auto& idx = poi_index_[c];
    v[kColPoiBegin + 2 * c] = static_cast<double>(idx.count_in_box(cell));
    v[kColPoiBegin + 2 * c + 1] = idx.empty() ? kDistanceCapM : idx.nearest(location).meters;
  }

  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (!luminosity_) {
      fv.flags |= kFlagNoLuminosityGrid;
      continue;
    }
    const auto stats = rasters::try_window_stats(*luminosity_, location, windows[w]);
    if (!stats) {
      fv.flags |= (kFlagLumWindowEmpty0 << w);
      continue;
    }
    const std::size_t base = kColLumBegin + 6 * w;
    v[base + 0] = stats->max;
    v[base + 1] = stats->mean;
    v[base + 2] = stats->median;
    v[base + 3] = stats->zero_ratio;
    v[base + 4] = stats->upper_third_mean;
    v[base + 5] = stats->lower_third_mean;
  }

  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (!population_) {
      fv.flags |= kFlagNoPopulationGrid;
      continue;
    }
    try {
      v[kColPopBegin + w] = rasters::window_sum(*population_, location, windows[w]).sum;
    } catch (const DataError&) {
      fv.flags |= kFlagPopulationNodata;
    }
  }
  return fv;
}

std::vector<FeatureVector> FeatureExtractor::extract_all(std::span<const geo::GeoPoint> locations) const {
  std::vector<FeatureVector> out(locations.size());
  parallel_for(locations.size(), [&](std::size_t i) { out[i] = extract(locations[i]); });
  return out;
}

std::string format_feature_table(std::span<const FeatureRow> rows) {
  std::ostringstream out;
  std::vector<std::string> header{"id", "lat", "lon", "flags", "has_image_probs"};
  for (const auto& n : feature_names()) header.push_back(n);
  write_csv_row(out, header);
  std::vector<std::string> fields;
  for (const auto& r : rows) {
    fields.clear();
    fields.push_back(r.id);
    fields.push_back(format_double(r.location.lat));
    fields.push_back(format_double(r.location.lon));
    fields.push_back(std::to_string(r.features.flags));
    fields.push_back(r.features.has_image_probs ? "1" : "0");
    for (double x : r.features.values) fields.push_back(format_double(x));
    write_csv_row(out, fields);
  }
  return out.str();
}

std::vector<FeatureRow> parse_feature_table(std::string_view text, std::string_view origin) {
  const CsvTable t = parse_csv(text, origin);
  if (t.header.size() != 5 + kFeatureCount) throw DataError(std::string(origin) + ": unexpected feature columns");
  const auto& names = feature_names();
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (t.header[5 + i] != names[i]) {
      throw DataError(std::string(origin) + ": column " + std::to_string(5 + i) + " should be " + names[i]);
    }
  }
  std::vector<FeatureRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& rec : t.rows) {
    FeatureRow r;
    r.id = rec[0];
    r.location = geo::make_point(parse_double(rec[1], "lat"), parse_double(rec[2], "lon"));
    r.features.flags = static_cast<std::uint32_t>(parse_int(rec[3], "flags"));
    r.features.has_image_probs = rec[4] == "1";
    for (std::size_t i = 0; i < kFeatureCount; ++i) r.features.values[i] = parse_double(rec[5 + i], names[i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace povmap::osm
