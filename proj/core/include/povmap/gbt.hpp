#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace povmap::gbt {

struct GbtConfig {
  double learning_rate = 0.03;
  int n_estimators = 200;
  int max_depth = 4;
  double min_child_weight = 2.0;
  double subsample = 1.0;
  double colsample_bytree = 1.0;
  double lambda = 0.1;  ///< L2 penalty on leaf weights
  double gamma = 0.0;   ///< minimum gain to split
  std::uint64_t seed = 0;

  /// Throws UsageError for values outside their mathematical domain.
  void validate() const;
  friend bool operator==(const GbtConfig&, const GbtConfig&) = default;
};

/// Dense row-major feature matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  static Matrix from_rows(std::span<const std::vector<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Node {
  std::int32_t feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;     ///< x[feature] < threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  ///< leaf weight (before the learning rate)
  friend bool operator==(const Node&, const Node&) = default;
};

struct Tree {
  std::vector<Node> nodes;  ///< nodes[0] is the root
  double predict(std::span<const double> x) const;
  int depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct GbtModel {
  double base = 0.0;
  std::size_t n_features = 0;
  GbtConfig config;
  std::vector<Tree> trees;
  std::vector<double> train_rmse;  ///< in-sample RMSE after each round

  /// base + learning_rate * sum of tree outputs. Throws UsageError on arity mismatch.
  double predict(std::span<const double> x) const;
  std::vector<double> predict_all(const Matrix& x) const;
  friend bool operator==(const GbtModel&, const GbtModel&) = default;
};

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);
inline double leaf_weight(double g, double h, double lambda) { return -g / (h + lambda); }

struct Split {
  double threshold = 0.0;
  double gain = 0.0;
  double g_left = 0.0, h_left = 0.0;
};

/// Threshold between consecutive distinct sorted values a < b: their midpoint,
/// or b when rounding pushes the midpoint down to a.
double split_threshold(double a, double b);

/// Best split of one feature: `values` ascending with g/h aligned. Candidates
/// are thresholds between consecutive distinct values; a split needs positive
/// gain and both child hessian sums >= min_child_weight. Ties keep the
/// smallest threshold. nullopt when no split qualifies.
std::optional<Split> best_split(std::span<const double> values, std::span<const double> g,
                                std::span<const double> h, const GbtConfig& config);

/// Squared-error boosting. Uses rows `subset` (all rows when empty).
/// Throws DataError for fewer than 2 rows or non-finite inputs.
GbtModel train(const Matrix& x, std::span<const double> y, const GbtConfig& config,
               std::span<const std::size_t> subset = {});

std::string model_to_json(const GbtModel& model);
GbtModel model_from_json(std::string_view text);
void save_model(const GbtModel& model, const std::filesystem::path& path);
GbtModel load_model(const std::filesystem::path& path);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling box; the defaults are the published tuning ranges.
struct SearchSpace {
  Range learning_rate{0.005, 0.03};
  Range n_estimators{200, 300};
  Range max_depth{3, 10};
  Range min_child_weight{2, 20};
  Range subsample{0.2, 1.0};
  Range colsample_bytree{0.2, 1.0};
  Range lambda{0.0, 0.1};
  double gamma = 0.0;
  /// Throws UsageError when a range is inverted or empty-valued.
  void validate() const;
};

GbtConfig sample_config(const SearchSpace& space, std::uint64_t seed);

struct SearchEntry {
  GbtConfig config;
  double score = 0.0;  ///< inner cross-validated pearson2
};

struct SearchResult {
  GbtConfig best;
  double best_score = 0.0;
  std::vector<SearchEntry> log;
  std::vector<std::size_t> touched_rows;  ///< ascending; the only rows read
};

/// Seeded random search. Every candidate is scored by inner k-fold R2 over
/// `rows` (training rows only); the first highest score wins.
SearchResult hyper_search(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                          const SearchSpace& space, std::size_t budget, std::uint64_t seed, std::size_t inner_k = 3);

}  // namespace povmap::gbt
