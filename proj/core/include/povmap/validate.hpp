#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace povmap::validate {

enum class Metric : std::uint8_t { kPearson2, kSsres };
Metric parse_metric(std::string_view name);  ///< "pearson2" | "ssres"; UsageError otherwise
std::string_view metric_name(Metric m);

struct RSquared {
  double pearson2 = 0.0;
  double ssres = 0.0;
  /// False when y_obs is constant (both variants undefined) or y_pred is
  /// constant (pearson2 undefined, reported as 0).
  bool pearson_defined = true;
  bool ssres_defined = true;
  double value(Metric m) const { return m == Metric::kPearson2 ? pearson2 : ssres; }
  friend bool operator==(const RSquared&, const RSquared&) = default;
};

/// Both variants. Throws DataError on length mismatch or fewer than 2 values.
RSquared r_squared_both(std::span<const double> y_obs, std::span<const double> y_pred);

/// Single variant. Throws DataError when the variant is undefined for the data
/// (constant observations).
double r_squared(std::span<const double> y_obs, std::span<const double> y_pred, Metric metric = Metric::kPearson2);

enum class Protocol : std::uint8_t { kKFold, kLoco, kPooled };
std::string_view protocol_name(Protocol p);
Protocol parse_protocol(std::string_view name);  ///< "kfold" | "loco" | "pooled"

/// Folds of near-equal size (differ by at most one) over a seeded shuffle of
/// [0, n). Entry i is the fold of item i. Throws UsageError for k < 2 or k > n.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

struct Fold {
  std::string unit;  ///< country for kfold/loco, "all" for pooled
  std::size_t index = 0;
  std::vector<std::size_t> train;  ///< ascending row indices
  std::vector<std::size_t> test;   ///< ascending row indices
};

struct Plan {
  Protocol protocol = Protocol::kKFold;
  std::size_t k = 0;  ///< 0 for loco
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
  std::vector<std::string> units;     ///< scored units, sorted
  std::vector<std::string> excluded;  ///< units skipped, with reason
};

/// Single-country estimation: every country with at least k rows is split into
/// k folds of its own rows; each fold trains on the rest of that country.
/// Countries with fewer rows are excluded and listed. Throws UsageError when k
/// exceeds every country's row count.
Plan plan_kfold(std::span<const std::string> countries, std::size_t k, std::uint64_t seed);

/// Cross-country estimation: one fold per country with at least 2 rows,
/// trained on all rows of every other country. Requires 2+ countries.
Plan plan_loco(std::span<const std::string> countries);

/// k folds over all rows, country identity ignored. Requires 2+ countries.
Plan plan_pooled(std::span<const std::string> countries, std::size_t k, std::uint64_t seed);

Plan make_plan(Protocol protocol, std::span<const std::string> countries, std::size_t k, std::uint64_t seed);

struct UnitScore {
  std::string unit;
  std::size_t n = 0;
  RSquared r2;
  friend bool operator==(const UnitScore&, const UnitScore&) = default;
};

struct ValidationReport {
  std::string protocol;  ///< "kfold-<k>", "loco" or "pooled"
  Metric metric = Metric::kPearson2;
  std::uint64_t seed = 0;
  std::vector<UnitScore> units;
  double mean = 0.0;  ///< mean over units of the chosen metric
  std::vector<std::string> row_ids;
  std::vector<std::int64_t> row_fold;  ///< fold index per row, -1 if never tested
  std::vector<double> predictions;     ///< out-of-fold prediction per row
  std::vector<std::string> excluded;
  std::vector<std::string> flags;

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

/// Scores out-of-fold predictions: kfold and loco per country, pooled as one
/// unit. `predictions[i]` must be set for every row tested by the plan.
ValidationReport score(const Plan& plan, std::span<const std::string> row_ids, std::span<const std::string> countries,
                       std::span<const double> y_obs, std::span<const double> predictions, Metric metric);

/// The same report summarized under another metric (units carry both).
ValidationReport with_metric(ValidationReport report, Metric metric);

/// Returns predictions for fold.test, in that order.
using Trainer = std::function<std::vector<double>(const Fold& fold)>;

/// Runs the trainer on every fold (in parallel) and scores the result.
ValidationReport evaluate(const Plan& plan, std::span<const std::string> row_ids,
                          std::span<const std::string> countries, std::span<const double> y_obs,
                          const Trainer& trainer, Metric metric);

ValidationReport kfold(std::span<const std::string> row_ids, std::span<const std::string> countries,
                       std::span<const double> y_obs, std::size_t k, std::uint64_t seed, const Trainer& trainer,
                       Metric metric = Metric::kPearson2);
ValidationReport leave_one_country_out(std::span<const std::string> row_ids, std::span<const std::string> countries,
                                       std::span<const double> y_obs, const Trainer& trainer,
                                       Metric metric = Metric::kPearson2);
ValidationReport pooled_eval(std::span<const std::string> row_ids, std::span<const std::string> countries,
                             std::span<const double> y_obs, std::size_t k, std::uint64_t seed,
                             const Trainer& trainer, Metric metric = Metric::kPearson2);

/// JSON report; includes published figures as reference-only metadata.
std::string format_report_json(const ValidationReport& report);
ValidationReport parse_report_json(std::string_view text);
/// unit,n,pearson2,ssres,value
std::string format_report_csv(const ValidationReport& report);

}  // namespace povmap::validate
