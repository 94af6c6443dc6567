#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "povmap/clusters.hpp"
#include "povmap/gbt.hpp"
#include "povmap/imgcls.hpp"
#include "povmap/osm_features.hpp"
#include "povmap/validate.hpp"

namespace povmap::refine {

/// A scoreable location: registry place or quadrant fallback candidate.
struct PlaceRecord {
  std::string place_id;
  std::string country;
  geo::GeoPoint location;
  osm::FeatureVector features;
  std::optional<std::size_t> tile;  ///< index into RefineData::tiles
};

struct RefineData {
  std::vector<PlaceRecord> places;  ///< sorted by place_id
  std::vector<clusters::SurveyCluster> clusters;
  std::vector<clusters::CandidateSet> candidates;  ///< aligned with clusters
  std::vector<imgcls::Tile> tiles;

  /// Throws DataError when ids are unsorted/duplicated, candidate sets are
  /// misaligned or name unknown places.
  void validate() const;
  std::optional<std::size_t> place_index(std::string_view place_id) const;
};

struct IterationOverride {
  std::optional<gbt::GbtConfig> gbt;
  std::optional<imgcls::TrainConfig> cnn;
  std::optional<std::vector<std::size_t>> fc_hidden;
};

/// Deliberate contamination for audit tests: one held-out cluster of the
/// given fold is added to that fold's training rows.
struct LeakInjection {
  validate::Protocol protocol = validate::Protocol::kLoco;
  std::size_t fold = 0;
  std::size_t iteration = 0;
};

struct RefineConfig {
  std::size_t iterations = 7;
  std::vector<validate::Protocol> protocols{validate::Protocol::kKFold, validate::Protocol::kLoco,
                                            validate::Protocol::kPooled};
  std::size_t k = 5;
  validate::Metric metric = validate::Metric::kPearson2;
  std::uint64_t seed = 0;
  gbt::GbtConfig gbt;
  gbt::SearchSpace search_space;
  std::size_t search_budget = 0;  ///< 0 disables hyperparameter search
  std::vector<std::size_t> search_iterations{0};
  std::size_t search_inner_k = 3;
  imgcls::ArchSpec arch;
  imgcls::TrainConfig cnn;
  std::size_t cnn_max_places = 0;  ///< 0: every labelable place with a tile
  std::vector<IterationOverride> overrides;  ///< indexed by iteration
  bool bootstrap = true;
  double stop_tolerance = 0.02;
  std::size_t stop_patience = 2;
  std::optional<LeakInjection> inject_leak;

  void validate() const;
};

struct FoldState {
  validate::Fold fold;
  gbt::GbtModel model;
  std::vector<std::size_t> trained_clusters;  ///< unique, ascending
  std::optional<gbt::SearchResult> search;    ///< touched_rows are cluster indices
  gbt::GbtConfig config;                      ///< config the model was trained with
};

struct ProtocolState {
  validate::Protocol protocol = validate::Protocol::kKFold;
  validate::Plan plan;
  std::vector<FoldState> folds;
  std::vector<std::vector<double>> candidate_pred;  ///< per cluster, aligned with candidates (out-of-fold)
  std::vector<double> cluster_pred;                 ///< mean of candidate_pred
  std::vector<std::optional<std::vector<std::string>>> narrowed;  ///< sets used for this iteration's training
  validate::ValidationReport report;
};

enum class Estimator : std::uint8_t { kSingleCountry, kCrossCountry };
std::string_view estimator_name(Estimator e);

/// Higher validation R2 wins; ties go to the cross-country estimator.
/// Throws DataError on a NaN score.
Estimator select_estimator(double single_score, double cross_score);

struct EstimatorChoice {
  std::string country;
  Estimator estimator = Estimator::kCrossCountry;
  std::optional<double> single_score, cross_score;
};

struct LabelRecord {
  std::size_t place = 0;  ///< index into RefineData::places
  double prediction = 0.0;
  int label = 0;
  validate::Protocol producer = validate::Protocol::kLoco;
  std::size_t producer_fold = 0;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::vector<std::pair<std::string, double>> scores;  ///< protocol name, mean R2
  std::size_t active_width = 0;
  std::size_t narrowed_clusters = 0;  ///< clusters whose subset is smaller than the candidate set
  std::size_t cnn_labels = 0;
  double cnn_train_accuracy = 0.0;
};

struct RefineState {
  std::size_t next_iteration = 0;
  std::vector<ProtocolState> protocols;
  std::optional<imgcls::CnnModel> cnn;
  std::vector<LabelRecord> cnn_labels;  ///< labels used to train the current CNN
  std::vector<EstimatorChoice> choices;
  std::vector<IterationRecord> history;
  std::vector<std::string> audit_log;  ///< append-only
  bool stopped = false;
  std::string stop_reason;

  const ProtocolState* find(validate::Protocol p) const;
};

/// One step of the refinement loop. Iteration 0 trains on all candidates,
/// iteration 1 narrows with the previous out-of-fold predictions, later
/// iterations first train the image classifier on cross-estimated place
/// labels and append its class probabilities to every feature vector.
/// `data` gains image features in place. Throws LeakageError when the audit
/// after the iteration finds a violation.
void run_iteration(RefineState& state, RefineData& data, const RefineConfig& config);

using IterationCallback = std::function<void(const RefineState&, const RefineData&)>;

/// Runs up to config.iterations iterations, stopping early once any protocol's
/// score drops by more than the tolerance on stop_patience consecutive steps.
/// `state` holds everything done so far when an iteration throws.
void run_refine(RefineState& state, RefineData& data, const RefineConfig& config,
                const IterationCallback& on_iteration = {});

struct AuditReport {
  std::vector<std::string> violations;
  bool clean() const { return violations.empty(); }
};

/// Read-only check that (a) no fold trained on its own test clusters (and no
/// cross-country fold on its held-out country), (b) every CNN label came from
/// a model that never trained on a cluster listing that place, and (c)
/// hyperparameter search only touched the fold's training clusters.
AuditReport leakage_audit(const RefineState& state, const RefineData& data);

/// SHA-256 over a canonical dump of the state (used to show the audit is read-only).
std::string state_digest(const RefineState& state);

/// Final per-place estimate: for each country the selected estimator's
/// prediction, averaged over folds whose test clusters list the place.
std::vector<double> place_predictions(const RefineState& state, const RefineData& data);

/// Writes models, predictions, reports and the audit log of the latest
/// iteration under `dir`/iter_XX, and appends to `dir`/audit.log.
void write_checkpoint(const RefineState& state, const RefineData& data, const std::filesystem::path& dir);
std::string format_history(const RefineState& state);
/// place_id,country,iwi_pred for every place.
std::string format_place_predictions(const RefineData& data, const std::vector<double>& preds);

}  // namespace povmap::refine
