#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"
#include "povmap/osm_features.hpp"

namespace povmap::osm {

using nlohmann::json;
using namespace std::string_view_literals;

const std::array<std::string_view, kPoiCategoryCount> kPoiCategories{
    "bar"sv,      "cafe"sv,     "fast_food"sv,        "pub"sv,        "college"sv,    "kindergarten"sv,
    "library"sv,  "school"sv,   "university"sv,       "bus_station"sv, "atm"sv,       "bank"sv,
    "clinic"sv,   "dentist"sv,  "hospital"sv,         "pharmacy"sv,   "veterinary"sv, "cinema"sv,
    "community_centre"sv, "courthouse"sv, "embassy"sv, "marketplace"sv, "police"sv,  "townhall"sv};

namespace {

constexpr std::array<std::string_view, 9> kRoadTags{"primary"sv,   "primary_link"sv,  "secondary"sv,
                                                    "secondary_link"sv, "tertiary"sv, "tertiary_link"sv,
                                                    "trunk"sv,     "trunk_link"sv,    "motorway"sv};

constexpr std::array<std::string_view, 12> kPavedTags{"paved"sv,  "asphalt"sv, "concrete"sv, "concrete:plates"sv,
                                                      "concrete:lanes"sv, "paving_stones"sv, "sett"sv,
                                                      "cobblestone"sv, "metal"sv, "wood"sv, "chipseal"sv,
                                                      "unhewn_cobblestone"sv};
constexpr std::array<std::string_view, 13> kUnpavedTags{"unpaved"sv, "gravel"sv, "fine_gravel"sv, "dirt"sv,
                                                        "earth"sv,   "ground"sv, "sand"sv,        "mud"sv,
                                                        "grass"sv,   "compacted"sv, "pebblestone"sv,
                                                        "laterite"sv, "clay"sv};

std::string record_id(const json& feature, std::size_t index, std::string_view prefix) {
  if (feature.contains("properties") && feature["properties"].is_object()) {
    const auto& props = feature["properties"];
    if (props.contains("id")) {
      const auto& id = props["id"];
      if (id.is_string()) return id.get<std::string>();
      if (id.is_number_integer()) return std::to_string(id.get<long long>());
    }
  }
  if (feature.contains("id")) {
    const auto& id = feature["id"];
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
  }
  return std::string(prefix) + std::to_string(index);
}

std::string string_property(const json& feature, const char* key) {
  if (!feature.contains("properties") || !feature["properties"].is_object()) return {};
  const auto& props = feature["properties"];
  if (!props.contains(key) || !props[key].is_string()) return {};
  return props[key].get<std::string>();
}

geo::GeoPoint position(const json& coord) {
  if (!coord.is_array() || coord.size() < 2 || !coord[0].is_number() || !coord[1].is_number()) {
    throw DataError("position must be [lon, lat]");
  }
  return geo::make_point(coord[1].get<double>(), coord[0].get<double>());
}

const json& features_of(const json& doc, std::string_view layer) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw DataError(std::string(layer) + ": expected a GeoJSON FeatureCollection");
  }
  return doc["features"];
}

json parse_json(std::string_view text, std::string_view layer) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(layer) + ": " + e.what());
  }
}

bool blank(std::string_view text) { return trim(text).empty(); }

// Proper or touching intersection of segments p1-p2 and p3-p4 in the plane.
int orientation(const geo::LocalXY& a, const geo::LocalXY& b, const geo::LocalXY& c) {
  const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return (v > 0.0) - (v < 0.0);
}
bool on_segment(const geo::LocalXY& a, const geo::LocalXY& b, const geo::LocalXY& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}
bool segments_intersect(const geo::LocalXY& p1, const geo::LocalXY& p2, const geo::LocalXY& p3,
                        const geo::LocalXY& p4) {
  const int o1 = orientation(p1, p2, p3), o2 = orientation(p1, p2, p4);
  const int o3 = orientation(p3, p4, p1), o4 = orientation(p3, p4, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, p3)) return true;
  if (o2 == 0 && on_segment(p1, p2, p4)) return true;
  if (o3 == 0 && on_segment(p3, p4, p1)) return true;
  if (o4 == 0 && on_segment(p3, p4, p2)) return true;
  return false;
}

}  // namespace

std::optional<RoadClass> parse_road_class(std::string_view tag) {
  for (std::size_t i = 0; i < kRoadTags.size(); ++i) {
    if (kRoadTags[i] == tag) return static_cast<RoadClass>(i);
  }
  return std::nullopt;
}

std::string_view road_class_name(RoadClass c) { return kRoadTags[static_cast<std::size_t>(c)]; }

Surface classify_surface(std::string_view tag) {
  if (std::find(kPavedTags.begin(), kPavedTags.end(), tag) != kPavedTags.end()) return Surface::kPaved;
  if (std::find(kUnpavedTags.begin(), kUnpavedTags.end(), tag) != kUnpavedTags.end()) return Surface::kUnpaved;
  return Surface::kUnknown;
}

std::string_view surface_name(Surface s) {
  switch (s) {
    case Surface::kPaved: return "paved";
    case Surface::kUnpaved: return "unpaved";
    case Surface::kUnknown: return "unknown";
  }
  return "unknown";
}

std::optional<std::uint8_t> parse_poi_category(std::string_view name) {
  std::string canon(trim(name));
  std::replace(canon.begin(), canon.end(), ' ', '_');
  for (std::size_t i = 0; i < kPoiCategories.size(); ++i) {
    if (kPoiCategories[i] == canon) return static_cast<std::uint8_t>(i);
  }
  return std::nullopt;
}

bool ring_self_intersects(std::span<const geo::GeoPoint> ring) {
  const std::size_t n = ring.size() - 1;  // closed: last == first
  if (n < 3) return false;
  const geo::GeoPoint origin = ring[0];
  std::vector<geo::LocalXY> xy;
  xy.reserve(ring.size());
  for (const auto& p : ring) xy.push_back(geo::project_local(origin, p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(xy[i], xy[i + 1], xy[j], xy[j + 1])) return true;
    }
  }
  return false;
}

Building make_building(std::string id, std::vector<geo::GeoPoint> ring) {
  if (ring.size() < 4) throw DataError("ring needs at least 4 positions");
  if (!(ring.front() == ring.back())) throw DataError("ring is not closed");
  if (ring_self_intersects(ring)) throw DataError("ring self-intersects");

  // Project at the vertex mean, then take the shoelace area and area centroid.
  double lat = 0.0, lon = 0.0;
  const std::size_t n = ring.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    lat += ring[i].lat;
    lon += ring[i].lon;
  }
  const geo::GeoPoint origin{lat / static_cast<double>(n), lon / static_cast<double>(n)};
  double twice_area = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = geo::project_local(origin, ring[i]);
    const auto b = geo::project_local(origin, ring[i + 1]);
    const double cross = a.x * b.y - b.x * a.y;
    twice_area += cross;
    cx += (a.x + b.x) * cross;
    cy += (a.y + b.y) * cross;
  }
  const double area = std::abs(twice_area) / 2.0;
  if (!(area > 0.0)) throw DataError("ring has zero area");
  Building b;
  b.building_id = std::move(id);
  b.centroid = geo::unproject_local(origin, {cx / (3.0 * twice_area), cy / (3.0 * twice_area)});
  b.area_m2 = area;
  b.ring = std::move(ring);
  return b;
}

LayerSet parse_layers(std::string_view ways_geojson, std::string_view pois_csv, std::string_view buildings_geojson) {
  LayerSet layers;

  if (!blank(ways_geojson)) {
    const json doc = parse_json(ways_geojson, "ways");
    const json& features = features_of(doc, "ways");
    for (std::size_t i = 0; i < features.size(); ++i) {
      const json& f = features[i];
      const std::string id = record_id(f, i, "way");
      const auto road = parse_road_class(string_property(f, "highway"));
      if (!road) {
        ++layers.warnings;
        continue;
      }
      try {
        if (!f.contains("geometry") || !f["geometry"].is_object() ||
            f["geometry"].value("type", "") != "LineString") {
          throw DataError("geometry is not a LineString");
        }
        const json& coords = f["geometry"]["coordinates"];
        if (!coords.is_array()) throw DataError("coordinates missing");
        Way w;
        w.way_id = id;
        w.highway = *road;
        w.surface = classify_surface(string_property(f, "surface"));
        for (const auto& c : coords) w.points.push_back(position(c));
        if (w.points.size() < 2) throw DataError("way needs at least 2 points");
        layers.ways.push_back(std::move(w));
      } catch (const DataError& e) {
        layers.rejects.push_back({"ways", id, e.what()});
      }
    }
  }

  if (!blank(pois_csv)) {
    const CsvTable t = parse_csv(pois_csv, "pois");
    const std::size_t id_col = t.column("poi_id");
    const std::size_t cat_col = t.column("category");
    const std::size_t lat_col = t.column("lat");
    const std::size_t lon_col = t.column("lon");
    for (const auto& row : t.rows) {
      const auto cat = parse_poi_category(row[cat_col]);
      if (!cat) {
        ++layers.warnings;
        continue;
      }
      try {
        layers.pois.push_back(
            {row[id_col], geo::make_point(parse_double(row[lat_col], "lat"), parse_double(row[lon_col], "lon")), *cat});
      } catch (const DataError& e) {
        layers.rejects.push_back({"pois", row[id_col], e.what()});
      }
    }
  }

  if (!blank(buildings_geojson)) {
    const json doc = parse_json(buildings_geojson, "buildings");
    const json& features = features_of(doc, "buildings");
    for (std::size_t i = 0; i < features.size(); ++i) {
      const json& f = features[i];
      const std::string id = record_id(f, i, "building");
      try {
        if (!f.contains("geometry") || !f["geometry"].is_object() ||
            f["geometry"].value("type", "") != "Polygon") {
          throw DataError("geometry is not a Polygon");
        }
        const json& rings = f["geometry"]["coordinates"];
        if (!rings.is_array() || rings.empty() || !rings[0].is_array()) throw DataError("polygon has no outer ring");
        std::vector<geo::GeoPoint> ring;
        for (const auto& c : rings[0]) ring.push_back(position(c));
        layers.buildings.push_back(make_building(id, std::move(ring)));
      } catch (const DataError& e) {
        layers.rejects.push_back({"buildings", id, e.what()});
      }
    }
  }
  return layers;
}

LayerSet ingest_layers(const std::filesystem::path& ways, const std::filesystem::path& pois,
                       const std::filesystem::path& buildings) {
  return parse_layers(read_text_file(ways), read_text_file(pois), read_text_file(buildings));
}

}  // namespace povmap::osm

namespace povmap::osm {

namespace {

json coords(const geo::GeoPoint& p) { return json::array({p.lon, p.lat}); }

}  // namespace

std::string format_ways(std::span<const Way> ways) {
  json features = json::array();
  for (const auto& w : ways) {
    json line = json::array();
    for (const auto& p : w.points) line.push_back(coords(p));
    json props = {{"id", w.way_id}, {"highway", std::string(road_class_name(w.highway))}};
    if (w.surface != Surface::kUnknown) props["surface"] = std::string(surface_name(w.surface));
    features.push_back({{"type", "Feature"},
                        {"properties", props},
                        {"geometry", {{"type", "LineString"}, {"coordinates", line}}}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump() + "\n";
}

std::string format_pois(std::span<const Poi> pois) {
  std::ostringstream out;
  write_csv_row(out, {"poi_id", "category", "lat", "lon"});
  for (const auto& p : pois) {
    write_csv_row(out, {p.poi_id, std::string(kPoiCategories[p.category]), format_double(p.location.lat),
                        format_double(p.location.lon)});
  }
  return out.str();
}

std::string format_buildings(std::span<const Building> buildings) {
  json features = json::array();
  for (const auto& b : buildings) {
    json ring = json::array();
    for (const auto& p : b.ring) ring.push_back(coords(p));
    features.push_back({{"type", "Feature"},
                        {"properties", {{"id", b.building_id}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump() + "\n";
}

}  // namespace povmap::osm
