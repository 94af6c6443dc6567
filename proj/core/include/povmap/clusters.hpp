#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "povmap/geo.hpp"
#include "povmap/osm_features.hpp"
#include "povmap/places.hpp"
#include "povmap/rasters.hpp"
#include "povmap/spatial_index.hpp"

namespace povmap::clusters {

/// Maximum displacement of survey cluster coordinates.
inline constexpr double kUrbanRadiusM = 2000.0;
inline constexpr double kRuralRadiusM = 5000.0;

struct SurveyCluster {
  std::string cluster_id;
  std::string country;
  geo::GeoPoint location;  ///< displaced coordinates
  bool urban = false;
  double iwi = 0.0;  ///< observed cluster mean, [0, 100]
};

inline double search_radius_m(const SurveyCluster& c) { return c.urban ? kUrbanRadiusM : kRuralRadiusM; }

enum class Provenance : std::uint8_t { kRadius, kQuadrantFallback, kNone };
std::string_view provenance_name(Provenance p);

struct Candidate {
  std::string place_id;
  geo::GeoPoint location;
};

struct CandidateSet {
  std::string cluster_id;
  std::vector<Candidate> candidates;  ///< sorted by place_id
  Provenance provenance = Provenance::kNone;
  /// Subset of candidate ids chosen by narrow(); nullopt before narrowing.
  std::optional<std::vector<std::string>> narrowed;
};

/// Registry places within the displacement radius (haversine <= 2 km urban,
/// 5 km rural). When none qualify, splits the disk into four bearing
/// quadrants and takes the most populated pixel of each quadrant (ids
/// "<cluster>#q<k>"). An empty set only results when neither applies.
CandidateSet assign_candidates(const SurveyCluster& cluster, const std::vector<places::PopulatedPlace>& registry,
                               const spatial::PointIndex& registry_index, const rasters::RasterGrid* population);

/// The four quadrant fallback candidates (fewer if a quadrant has no data pixel).
std::vector<Candidate> quadrant_candidates(const SurveyCluster& cluster, const rasters::RasterGrid& population);

enum class WealthGroup : std::uint8_t { kPoorer, kMiddle, kRicher };

struct NarrowResult {
  std::vector<std::string> subset;  ///< sorted candidate ids, never empty
  bool skipped = false;             ///< fewer than 3 candidates: subset = all
  bool fallback = false;            ///< chosen group empty: closest prediction kept
  WealthGroup group = WealthGroup::kMiddle;
  double lower = 0.0;  ///< 33.33rd percentile of candidate predictions
  double upper = 0.0;  ///< 66.67th percentile
};

/// Tercile narrowing. Thresholds are the 100/3 and 200/3 percentiles of the
/// candidates' predicted IWI; the observed IWI picks poorer (< lower),
/// middle ([lower, upper)) or richer (>= upper), and the subset is the
/// candidates whose predictions fall in that group. Throws DataError when a
/// candidate has no prediction.
NarrowResult narrow(const CandidateSet& set, const std::unordered_map<std::string, double>& predictions,
                    double observed_iwi);

struct TrainingRow {
  std::string cluster_id;
  std::string country;
  std::vector<double> x;
  double y = 0.0;
};

struct TrainingRows {
  std::vector<TrainingRow> rows;
  std::vector<std::string> audit;  ///< excluded clusters and why
};

/// One row per cluster: x is the component-wise mean of the first `width`
/// feature columns over the narrowed subset when present, else all candidates.
/// Clusters with a missing candidate feature vector are excluded and audited.
TrainingRows training_rows(std::span<const SurveyCluster> clusters, std::span<const CandidateSet> sets,
                           const std::unordered_map<std::string, osm::FeatureVector>& features, std::size_t width);

/// Clusters CSV: cluster_id,country,lat,lon,urban,iwi.
std::vector<SurveyCluster> parse_clusters(std::string_view text, std::string_view origin = "<memory>");
std::vector<SurveyCluster> read_clusters(const std::filesystem::path& path);
std::string format_clusters(std::span<const SurveyCluster> clusters);

/// Candidates CSV: cluster_id,provenance,place_id,lat,lon.
std::string format_candidates(std::span<const CandidateSet> sets);

}  // namespace povmap::clusters
