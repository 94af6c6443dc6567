#include "povmap/places.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"
#include "povmap/parallel.hpp"

namespace povmap::places {

std::string_view source_name(Source s) {
  switch (s) {
    case Source::kListA: return "list-A";
    case Source::kListB: return "list-B";
    case Source::kRaster: return "raster-derived";
  }
  return "?";
}

Source parse_source(std::string_view text) {
  if (text == "list-A") return Source::kListA;
  if (text == "list-B") return Source::kListB;
  if (text == "raster-derived") return Source::kRaster;
  throw DataError("unknown place source '" + std::string(text) + "'");
}

std::string PopulatedPlace::joined_names() const {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ';';
    out += names[i];
  }
  return out;
}

namespace {

// Accepted places bucketed on a coarse lat/lon grid so merge lookups stay local.
class AcceptedBuckets {
 public:
  static constexpr double kBucketDeg = 0.05;  // > 1 km everywhere below 85 degrees

  void add(std::size_t idx, const geo::GeoPoint& p) { buckets_[key(p)].push_back(idx); }

  template <typename Fn>
  void for_near(const geo::GeoPoint& p, Fn&& fn) const {
    const auto [r, c] = cell(p);
    const long long lon_reach =
        1 + static_cast<long long>(std::ceil(kMergeDistanceM / (geo::kMetersPerDegree * kBucketDeg *
                                                                 std::max(std::cos(p.lat * std::numbers::pi / 180.0), 0.05))));
    for (long long dr = -1; dr <= 1; ++dr) {
      for (long long dc = -lon_reach; dc <= lon_reach; ++dc) {
        auto it = buckets_.find(pack(r + dr, c + dc));
        if (it == buckets_.end()) continue;
        for (std::size_t idx : it->second) fn(idx);
      }
    }
  }

 private:
  static std::pair<long long, long long> cell(const geo::GeoPoint& p) {
    return {static_cast<long long>(std::floor(p.lat / kBucketDeg)),
            static_cast<long long>(std::floor(p.lon / kBucketDeg))};
  }
  static std::uint64_t pack(long long r, long long c) {
    return (static_cast<std::uint64_t>(r + (1LL << 31)) << 32) ^ static_cast<std::uint64_t>(c + (1LL << 31));
  }
  static std::uint64_t key(const geo::GeoPoint& p) {
    const auto [r, c] = cell(p);
    return pack(r, c);
  }
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

void add_names(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const auto& n : from) {
    if (!n.empty() && std::find(into.begin(), into.end(), n) == into.end()) into.push_back(n);
  }
  std::sort(into.begin(), into.end());
}

}  // namespace

std::vector<PopulatedPlace> merge_places(const std::vector<PopulatedPlace>& list_a,
                                         const std::vector<PopulatedPlace>& list_b, MergeStats* stats) {
  std::vector<PopulatedPlace> accepted;
  AcceptedBuckets buckets;
  MergeStats local;
  std::unordered_set<std::string> ids;

  auto consider = [&](const PopulatedPlace& p) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d = std::numeric_limits<double>::infinity();
    buckets.for_near(p.location, [&](std::size_t idx) {
      const double d = geo::haversine_m(p.location, accepted[idx].location);
      if (d < kMergeDistanceM && (d < best_d || (d == best_d && idx < best))) {
        best_d = d;
        best = idx;
      }
    });
    if (best != std::numeric_limits<std::size_t>::max()) {
      add_names(accepted[best].names, p.names);
      if (accepted[best].admin1.empty()) accepted[best].admin1 = p.admin1;
      if (accepted[best].admin2.empty()) accepted[best].admin2 = p.admin2;
      ++local.merged;
      return;
    }
    if (!ids.insert(p.place_id).second) throw DataError("duplicate place_id '" + p.place_id + "'");
    PopulatedPlace copy = p;
    add_names(copy.names, {});
    buckets.add(accepted.size(), copy.location);
    accepted.push_back(std::move(copy));
    ++local.accepted;
  };
  for (const auto& p : list_a) consider(p);
  for (const auto& p : list_b) consider(p);
  if (stats) *stats = local;
  return accepted;
}

std::vector<PopulatedPlace> extract_raster_places(const rasters::RasterGrid& pop, const geo::BBox& bounds,
                                                  const std::vector<PopulatedPlace>& registry,
                                                  std::string_view id_prefix) {
  pop.validate();
  if (!bounds.intersects(pop.bounds())) throw DataError("country bounds do not overlap the population grid");

  const double cell_deg_lat = 1600.0 / geo::kMetersPerDegree;
  const auto n_rows = static_cast<std::size_t>(std::ceil(bounds.lat_span() / cell_deg_lat));

  // Assign registry places to cells up front.
  std::set<std::pair<std::size_t, std::size_t>> occupied;
  auto col_width = [&](std::size_t row) {
    const double mid_lat = bounds.min_lat + (static_cast<double>(row) + 0.5) * cell_deg_lat;
    return cell_deg_lat / std::cos(mid_lat * std::numbers::pi / 180.0);
  };
  for (const auto& p : registry) {
    if (!bounds.contains(p.location)) continue;
    const auto row = static_cast<std::size_t>((p.location.lat - bounds.min_lat) / cell_deg_lat);
    const auto col = static_cast<std::size_t>((p.location.lon - bounds.min_lon) / col_width(row));
    occupied.insert({row, col});
  }

  std::vector<PopulatedPlace> out;
  std::size_t serial = 0;
  for (std::size_t row = 0; row < n_rows; ++row) {
    const double w = col_width(row);
    const auto n_cols = static_cast<std::size_t>(std::ceil(bounds.lon_span() / w));
    for (std::size_t col = 0; col < n_cols; ++col) {
      if (occupied.count({row, col})) continue;
      const geo::BBox cell{bounds.min_lat + static_cast<double>(row) * cell_deg_lat,
                           std::min(bounds.max_lat, bounds.min_lat + static_cast<double>(row + 1) * cell_deg_lat),
                           bounds.min_lon + static_cast<double>(col) * w,
                           std::min(bounds.max_lon, bounds.min_lon + static_cast<double>(col + 1) * w)};
      double total = 0.0;
      double best_v = -std::numeric_limits<double>::infinity();
      geo::GeoPoint best_at{};
      rasters::for_each_pixel_in(pop, cell, [&](std::size_t r, std::size_t c, double v) {
        total += v;
        if (v > best_v) {
          best_v = v;
          best_at = pop.pixel_center(r, c);
        }
      });
      if (!(total > kRasterPlaceMinPopulation)) continue;
      PopulatedPlace p;
      p.place_id = std::string(id_prefix) + std::to_string(serial++);
      p.source = Source::kRaster;
      p.location = best_at;
      out.push_back(std::move(p));
    }
  }
  return out;
}

void attach_populations(std::vector<PopulatedPlace>& registry, const rasters::RasterGrid& pop) {
  pop.validate();
  const auto& windows = geo::WindowSpec::standard();
  parallel_for(registry.size(), [&](std::size_t i) {
    PopulatedPlace& p = registry[i];
    p.population_nodata = false;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      try {
        p.population[k] = rasters::window_sum(pop, p.location, windows[k]).sum;
      } catch (const DataError&) {
        p.population[k] = 0.0;
        p.population_nodata = true;
      }
    }
  });
}

std::vector<PopulatedPlace> parse_place_list(std::string_view text, Source source, std::string_view origin) {
  const CsvTable t = parse_csv(text, origin);
  const std::size_t id = t.column("place_id");
  const std::size_t lat = t.column("lat");
  const std::size_t lon = t.column("lon");
  const auto name = t.find("name");
  const auto a1 = t.find("admin1");
  const auto a2 = t.find("admin2");
  std::vector<PopulatedPlace> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    PopulatedPlace p;
    p.place_id = row[id];
    p.source = source;
    if (name && !row[*name].empty()) p.names.push_back(row[*name]);
    p.location = geo::make_point(parse_double(row[lat], "lat"), parse_double(row[lon], "lon"));
    if (a1) p.admin1 = row[*a1];
    if (a2) p.admin2 = row[*a2];
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PopulatedPlace> read_place_list(const std::filesystem::path& path, Source source) {
  return parse_place_list(read_text_file(path), source, path.string());
}

std::string format_registry(const std::vector<PopulatedPlace>& registry) {
  std::ostringstream out;
  write_csv_row(out, {"place_id", "source", "name", "lat", "lon", "admin1", "admin2", "pop_1p6", "pop_5", "pop_10"});
  for (const auto& p : registry) {
    write_csv_row(out, {p.place_id, std::string(source_name(p.source)), p.joined_names(),
                        format_double(p.location.lat), format_double(p.location.lon), p.admin1, p.admin2,
                        p.population_nodata ? "" : format_double(p.population[0]),
                        p.population_nodata ? "" : format_double(p.population[1]),
                        p.population_nodata ? "" : format_double(p.population[2])});
  }
  return out.str();
}

void write_registry(const std::vector<PopulatedPlace>& registry, const std::filesystem::path& path) {
  write_text_file(path, format_registry(registry));
}

std::vector<PopulatedPlace> parse_registry(std::string_view text, std::string_view origin) {
  const CsvTable t = parse_csv(text, origin);
  const std::array<std::size_t, 10> c{t.column("place_id"), t.column("source"), t.column("name"),
                                      t.column("lat"),      t.column("lon"),    t.column("admin1"),
                                      t.column("admin2"),   t.column("pop_1p6"), t.column("pop_5"),
                                      t.column("pop_10")};
  std::vector<PopulatedPlace> out;
  out.reserve(t.rows.size());
  std::unordered_set<std::string> ids;
  for (const auto& row : t.rows) {
    PopulatedPlace p;
    p.place_id = row[c[0]];
    if (!ids.insert(p.place_id).second) throw DataError(std::string(origin) + ": duplicate place_id " + p.place_id);
    p.source = parse_source(row[c[1]]);
    std::string_view names = row[c[2]];
    while (!names.empty()) {
      const auto semi = names.find(';');
      p.names.emplace_back(names.substr(0, semi));
      if (semi == std::string_view::npos) break;
      names.remove_prefix(semi + 1);
    }
    p.location = geo::make_point(parse_double(row[c[3]], "lat"), parse_double(row[c[4]], "lon"));
    p.admin1 = row[c[5]];
    p.admin2 = row[c[6]];
    if (row[c[7]].empty()) {
      p.population_nodata = true;
    } else {
      for (std::size_t k = 0; k < 3; ++k) {
        p.population[k] = parse_double(row[c[7 + k]], "population");
        if (p.population[k] < 0.0) throw DataError(std::string(origin) + ": negative population for " + p.place_id);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PopulatedPlace> read_registry(const std::filesystem::path& path) {
  return parse_registry(read_text_file(path), path.string());
}

}  // namespace povmap::places

namespace povmap::places {

std::string format_place_list(const std::vector<PopulatedPlace>& places) {
  std::ostringstream out;
  write_csv_row(out, {"place_id", "name", "lat", "lon", "admin1", "admin2"});
  for (const auto& p : places) {
    write_csv_row(out, {p.place_id, p.joined_names(), format_double(p.location.lat), format_double(p.location.lon),
                        p.admin1, p.admin2});
  }
  return out.str();
}

}  // namespace povmap::places
