#include "povmap/export.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"

namespace povmap::exports {

using nlohmann::json;

Rgb iwi_color(double iwi) {
  const double v = std::clamp(std::isnan(iwi) ? 0.0 : iwi, 0.0, 100.0);
  auto channel = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
  if (v <= 50.0) {
    const double t = v / 50.0;
    return {255, channel(t), 0};
  }
  const double t = (v - 50.0) / 50.0;
  return {channel(1.0 - t), channel(1.0 - t), channel(t)};
}

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::vector<ExportRow> join(const std::vector<places::PopulatedPlace>& registry,
                            const std::map<std::string, double>& predictions, bool allow_partial,
                            std::vector<std::string>* missing) {
  std::vector<ExportRow> rows;
  std::vector<std::string> uncovered;
  for (const auto& p : registry) {
    auto it = predictions.find(p.place_id);
    if (it == predictions.end()) {
      uncovered.push_back(p.place_id);
      continue;
    }
    ExportRow r;
    r.place_id = p.place_id;
    r.name = p.joined_names();
    r.lat = p.location.lat;
    r.lon = p.location.lon;
    r.admin1 = p.admin1;
    r.admin2 = p.admin2;
    if (!p.population_nodata) r.pop_1p6 = p.population[0];
    r.iwi_pred = it->second;
    rows.push_back(std::move(r));
  }
  if (!uncovered.empty() && !allow_partial) {
    std::string list;
    for (std::size_t i = 0; i < uncovered.size() && i < 10; ++i) list += (i ? ", " : "") + uncovered[i];
    if (uncovered.size() > 10) list += ", ...";
    throw DataError("export: " + std::to_string(uncovered.size()) + " places have no prediction (" + list +
                    "); pass --allow-partial to export the rest");
  }
  if (missing) *missing = std::move(uncovered);
  return rows;
}

std::string format_csv(const std::vector<ExportRow>& rows) {
  std::ostringstream out;
  write_csv_row(out, {"place_id", "name", "lat", "lon", "admin1", "admin2", "pop_1p6", "iwi_pred"});
  for (const auto& r : rows) {
    write_csv_row(out, {r.place_id, r.name, format_double(r.lat), format_double(r.lon), r.admin1, r.admin2,
                        r.pop_1p6 ? format_double(*r.pop_1p6) : "", format_double(r.iwi_pred)});
  }
  return out.str();
}

std::string format_geojson(const std::vector<ExportRow>& rows) {
  json features = json::array();
  for (const auto& r : rows) {
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {r.lon, r.lat}}}},
                        {"properties",
                         {{"place_id", r.place_id},
                          {"name", r.name},
                          {"lat", r.lat},
                          {"lon", r.lon},
                          {"admin1", r.admin1},
                          {"admin2", r.admin2},
                          {"pop_1p6", r.pop_1p6 ? json(*r.pop_1p6) : json()},
                          {"iwi_pred", r.iwi_pred}}}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) + "\n";
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_svg(const std::vector<ExportRow>& rows, std::size_t width) {
  double min_lat = 0, max_lat = 1, min_lon = 0, max_lon = 1;
  if (!rows.empty()) {
    min_lat = max_lat = rows[0].lat;
    min_lon = max_lon = rows[0].lon;
    for (const auto& r : rows) {
      min_lat = std::min(min_lat, r.lat);
      max_lat = std::max(max_lat, r.lat);
      min_lon = std::min(min_lon, r.lon);
      max_lon = std::max(max_lon, r.lon);
    }
  }
  const double span = std::max({max_lat - min_lat, max_lon - min_lon, 1e-6});
  const double margin = 10.0;
  const double scale = (static_cast<double>(width) - 2 * margin) / span;
  const double height = (max_lat - min_lat) * scale + 2 * margin;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << format_double(std::ceil(height)) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (const auto& r : rows) {
    const double x = margin + (r.lon - min_lon) * scale;
    const double y = margin + (max_lat - r.lat) * scale;
    out << "<circle cx=\"" << format_double(std::round(x * 100) / 100) << "\" cy=\""
        << format_double(std::round(y * 100) / 100) << "\" r=\"3\" fill=\"" << hex(iwi_color(r.iwi_pred))
        << "\"><title>" << xml_escape(r.place_id) << " " << format_double(r.iwi_pred) << "</title></circle>\n";
  }
  out << "</svg>\n";
  return out.str();
}

Format parse_format(std::string_view name) {
  if (name == "csv") return Format::kCsv;
  if (name == "geojson") return Format::kGeoJson;
  if (name == "svg") return Format::kSvg;
  throw UsageError("unknown export format '" + std::string(name) + "' (csv, geojson, svg)");
}

std::vector<std::filesystem::path> export_maps(const std::vector<ExportRow>& rows, const std::vector<Format>& formats,
                                               const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (Format f : formats) {
    switch (f) {
      case Format::kCsv:
        out.push_back(dir / "places.csv");
        write_text_file(out.back(), format_csv(rows));
        break;
      case Format::kGeoJson:
        out.push_back(dir / "places.geojson");
        write_text_file(out.back(), format_geojson(rows));
        break;
      case Format::kSvg:
        out.push_back(dir / "places.svg");
        write_text_file(out.back(), format_svg(rows));
        break;
    }
  }
  return out;
}

}  // namespace povmap::exports
