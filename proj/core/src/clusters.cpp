#include "povmap/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "povmap/csv.hpp"
#include "povmap/error.hpp"
#include "povmap/format.hpp"
#include "povmap/stats.hpp"

namespace povmap::clusters {

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kRadius: return "radius";
    case Provenance::kQuadrantFallback: return "quadrant-fallback";
    case Provenance::kNone: return "none";
  }
  return "none";
}

std::vector<Candidate> quadrant_candidates(const SurveyCluster& cluster, const rasters::RasterGrid& population) {
  const double radius = search_radius_m(cluster);
  const geo::BBox box = geo::box_around(cluster.location, 2.0 * radius);
  struct Best {
    double value = -std::numeric_limits<double>::infinity();
    geo::GeoPoint at{};
    bool found = false;
  };
  std::array<Best, 4> best{};
  rasters::for_each_pixel_in(population, box, [&](std::size_t r, std::size_t c, double v) {
    const geo::GeoPoint center = population.pixel_center(r, c);
    if (geo::haversine_m(cluster.location, center) > radius) return;
    const auto q = std::min<std::size_t>(3, static_cast<std::size_t>(geo::bearing_deg(cluster.location, center) / 90.0));
    if (!best[q].found || v > best[q].value) best[q] = {v, center, true};
  });
  std::vector<Candidate> out;
  for (std::size_t q = 0; q < 4; ++q) {
    if (best[q].found) out.push_back({cluster.cluster_id + "#q" + std::to_string(q), best[q].at});
  }
  return out;
}

CandidateSet assign_candidates(const SurveyCluster& cluster, const std::vector<places::PopulatedPlace>& registry,
                               const spatial::PointIndex& registry_index, const rasters::RasterGrid* population) {
  CandidateSet set;
  set.cluster_id = cluster.cluster_id;
  for (std::size_t i : registry_index.within_radius(cluster.location, search_radius_m(cluster))) {
    set.candidates.push_back({registry[i].place_id, registry[i].location});
  }
  if (!set.candidates.empty()) {
    set.provenance = Provenance::kRadius;
  } else if (population) {
    set.candidates = quadrant_candidates(cluster, *population);
    if (!set.candidates.empty()) set.provenance = Provenance::kQuadrantFallback;
  }
  std::sort(set.candidates.begin(), set.candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.place_id < b.place_id; });
  return set;
}

NarrowResult narrow(const CandidateSet& set, const std::unordered_map<std::string, double>& predictions,
                    double observed_iwi) {
  NarrowResult out;
  std::vector<std::pair<std::string, double>> preds;
  preds.reserve(set.candidates.size());
  for (const auto& c : set.candidates) {
    auto it = predictions.find(c.place_id);
    if (it == predictions.end()) throw DataError("no prediction for candidate " + c.place_id);
    preds.emplace_back(c.place_id, it->second);
  }
  std::sort(preds.begin(), preds.end());
  if (preds.size() < 3) {
    out.skipped = true;
    for (const auto& [id, p] : preds) out.subset.push_back(id);
    return out;
  }
  std::vector<double> values;
  for (const auto& [id, p] : preds) values.push_back(p);
  std::sort(values.begin(), values.end());
  out.lower = percentile_sorted(values, 100.0 / 3.0);
  out.upper = percentile_sorted(values, 200.0 / 3.0);

  auto group_of = [&](double v) {
    if (v < out.lower) return WealthGroup::kPoorer;
    if (v < out.upper) return WealthGroup::kMiddle;
    return WealthGroup::kRicher;
  };
  out.group = group_of(observed_iwi);
  for (const auto& [id, p] : preds) {
    if (group_of(p) == out.group) out.subset.push_back(id);
  }
  if (out.subset.empty()) {
    out.fallback = true;
    const std::pair<std::string, double>* best = nullptr;
    for (const auto& entry : preds) {
      if (!best || std::abs(entry.second - observed_iwi) < std::abs(best->second - observed_iwi)) best = &entry;
    }
    out.subset.push_back(best->first);
  }
  return out;
}

TrainingRows training_rows(std::span<const SurveyCluster> clusters, std::span<const CandidateSet> sets,
                           const std::unordered_map<std::string, osm::FeatureVector>& features, std::size_t width) {
  if (width > osm::kFeatureCount) throw UsageError("training_rows: width exceeds the feature layout");
  std::unordered_map<std::string, const CandidateSet*> by_id;
  for (const auto& s : sets) by_id[s.cluster_id] = &s;

  TrainingRows out;
  for (const auto& c : clusters) {
    auto it = by_id.find(c.cluster_id);
    if (it == by_id.end() || it->second->candidates.empty()) {
      out.audit.push_back(c.cluster_id + ": no candidate places");
      continue;
    }
    const CandidateSet& set = *it->second;
    std::vector<std::string> active;
    if (set.narrowed) {
      active = *set.narrowed;
    } else {
      for (const auto& cand : set.candidates) active.push_back(cand.place_id);
    }
    std::vector<const osm::FeatureVector*> vecs;
    std::string missing;
    for (const auto& id : active) {
      auto f = features.find(id);
      if (f == features.end()) {
        missing = id;
        break;
      }
      vecs.push_back(&f->second);
    }
    if (!missing.empty() || vecs.empty()) {
      out.audit.push_back(c.cluster_id + ": missing feature vector for candidate " + missing);
      continue;
    }
    TrainingRow row;
    row.cluster_id = c.cluster_id;
    row.country = c.country;
    row.y = c.iwi;
    row.x.assign(width, 0.0);
    for (const auto* v : vecs) {
      for (std::size_t j = 0; j < width; ++j) row.x[j] += v->values[j];
    }
    for (double& x : row.x) x /= static_cast<double>(vecs.size());
    out.rows.push_back(std::move(row));
  }
  return out;
}

namespace {

bool parse_urban(std::string_view v) {
  v = trim(v);
  if (v == "1" || v == "true" || v == "U" || v == "urban") return true;
  if (v == "0" || v == "false" || v == "R" || v == "rural") return false;
  throw DataError("urban flag must be 1/0, true/false, U/R or urban/rural; got '" + std::string(v) + "'");
}

}  // namespace

std::vector<SurveyCluster> parse_clusters(std::string_view text, std::string_view origin) {
  const CsvTable t = parse_csv(text, origin);
  const std::size_t id = t.column("cluster_id"), country = t.column("country"), lat = t.column("lat"),
                    lon = t.column("lon"), urban = t.column("urban"), iwi = t.column("iwi");
  std::vector<SurveyCluster> out;
  std::map<std::string, int> seen;
  for (const auto& row : t.rows) {
    SurveyCluster c;
    c.cluster_id = row[id];
    if (seen[c.cluster_id]++) throw DataError(std::string(origin) + ": duplicate cluster_id " + c.cluster_id);
    c.country = row[country];
    c.location = geo::make_point(parse_double(row[lat], "lat"), parse_double(row[lon], "lon"));
    c.urban = parse_urban(row[urban]);
    c.iwi = parse_double(row[iwi], "iwi");
    if (!(c.iwi >= 0.0 && c.iwi <= 100.0)) {
      throw DataError(std::string(origin) + ": cluster " + c.cluster_id + " IWI outside [0, 100]");
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<SurveyCluster> read_clusters(const std::filesystem::path& path) {
  return parse_clusters(read_text_file(path), path.string());
}

std::string format_clusters(std::span<const SurveyCluster> clusters) {
  std::ostringstream out;
  write_csv_row(out, {"cluster_id", "country", "lat", "lon", "urban", "iwi"});
  for (const auto& c : clusters) {
    write_csv_row(out, {c.cluster_id, c.country, format_double(c.location.lat), format_double(c.location.lon),
                        c.urban ? "1" : "0", format_double(c.iwi)});
  }
  return out.str();
}

std::string format_candidates(std::span<const CandidateSet> sets) {
  std::ostringstream out;
  write_csv_row(out, {"cluster_id", "provenance", "place_id", "lat", "lon"});
  for (const auto& s : sets) {
    for (const auto& c : s.candidates) {
      write_csv_row(out, {s.cluster_id, std::string(provenance_name(s.provenance)), c.place_id,
                          format_double(c.location.lat), format_double(c.location.lon)});
    }
  }
  return out.str();
}

}  // namespace povmap::clusters
