#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "povmap/geo.hpp"
#include "povmap/osm_features.hpp"
#include "povmap/rasters.hpp"
#include "povmap/synth.hpp"

#include <fstream>
#include <json.hpp>

namespace fixture {

namespace fs = std::filesystem;

inline fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("povmap_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline const std::vector<std::pair<std::string, std::vector<std::string>>>& indicators() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> v{
      {"tv", {"no", "yes"}},
      {"fridge", {"no", "yes"}},
      {"phone", {"no", "yes"}},
      {"bike", {"no", "yes"}},
      {"car", {"no", "yes"}},
      {"water", {"low", "medium", "high"}},
      {"electricity", {"no", "yes"}},
      {"rooms", {"zero_or_one", "two", "three_plus"}},
      {"floor", {"low", "medium", "high"}},
      {"toilet", {"low", "medium", "high"}},
  };
  return v;
}

using Answers = std::map<std::string, std::optional<std::string>>;

struct Households {
  std::string csv;
  std::vector<Answers> answers;
  std::vector<std::size_t> missing;
};

// n households with up to `max_missing` blank answers each.
inline Households random_households(std::size_t n, std::size_t max_missing, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Households out;
  std::ostringstream csv;
  csv << "household_id,cluster_id";
  for (const auto& [name, cats] : indicators()) csv << ',' << name;
  csv << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t missing = std::uniform_int_distribution<std::size_t>(0, max_missing)(rng);
    std::vector<std::size_t> order(indicators().size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> blank(order.size(), false);
    for (std::size_t k = 0; k < missing; ++k) blank[order[k]] = true;
    Answers a;
    csv << "h" << i << ",c" << (i % 37);
    for (std::size_t k = 0; k < indicators().size(); ++k) {
      const auto& [name, cats] = indicators()[k];
      csv << ',';
      if (blank[k]) {
        a[name] = std::nullopt;
      } else {
        const auto& label = cats[std::uniform_int_distribution<std::size_t>(0, cats.size() - 1)(rng)];
        a[name] = label;
        csv << label;
      }
    }
    csv << '\n';
    out.answers.push_back(std::move(a));
    out.missing.push_back(missing);
  }
  out.csv = csv.str();
  return out;
}

// Grid of the given size over a box anchored at (lat0, lon0), row 0 north.
inline povmap::rasters::RasterGrid grid(std::size_t rows, std::size_t cols, double lat0, double lon0, double cellsize,
                                        double fill = 0.0) {
  povmap::rasters::RasterGrid g;
  g.nrows = rows;
  g.ncols = cols;
  g.yll = lat0;
  g.xll = lon0;
  g.cellsize = cellsize;
  g.values.assign(rows * cols, fill);
  return g;
}

inline povmap::osm::Way way(std::string id, std::vector<povmap::geo::GeoPoint> pts,
                            povmap::osm::Surface surface = povmap::osm::Surface::kPaved) {
  povmap::osm::Way w;
  w.way_id = std::move(id);
  w.points = std::move(pts);
  w.highway = povmap::osm::RoadClass::kTertiary;
  w.surface = surface;
  return w;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

#ifdef POVMAP_SOURCE_DIR
inline fs::path config(const std::string& name) { return fs::path(POVMAP_SOURCE_DIR) / "configs" / name; }

// Writes the small three-country world into `dir`; returns the manifest path.
inline fs::path tiny_world(const fs::path& dir, std::string_view extra_refine = {}) {
  auto doc = nlohmann::json::parse(read_file(config("synth_tiny.json")));
  auto pipeline = doc["pipeline"];
  doc.erase("pipeline");
  if (!extra_refine.empty()) pipeline["refine"].update(nlohmann::json::parse(extra_refine));
  const auto spec = povmap::synth::parse_synth_spec(doc.dump());
  return povmap::synth::write_world(povmap::synth::generate(spec), dir, pipeline.dump());
}
#endif

}  // namespace fixture
