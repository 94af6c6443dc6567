#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "povmap/random.hpp"
#include "povmap/tile.hpp"

namespace povmap::imgcls {

inline constexpr std::size_t kClassCount = 4;
using Probs = std::array<double, kClassCount>;

enum WealthClass : int { kPoor = 0, kLowerMiddle = 1, kUpperMiddle = 2, kRich = 3 };
std::string_view class_name(int c);

struct ClassThresholds {
  double t1 = 0.0, t2 = 0.0, t3 = 0.0;
  /// Number of thresholds <= iwi: poor below t1, rich at or above t3.
  int classify(double iwi) const { return (iwi >= t1) + (iwi >= t2) + (iwi >= t3); }
  /// Throws DataError unless t1 < t2 < t3.
  void validate() const;
  friend bool operator==(const ClassThresholds&, const ClassThresholds&) = default;
};

struct Labels {
  std::vector<int> labels;
  ClassThresholds thresholds;
  bool degenerate = false;  ///< constant predictions: one class for all
  std::string warning;
};

/// Thresholds default to the 25/50/75 percentiles of `predictions` (at least
/// 4 values needed); explicit thresholds skip the fit.
Labels make_labels(std::span<const double> predictions, std::optional<ClassThresholds> thresholds = std::nullopt);

struct ConvSpec {
  std::size_t channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 2;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// conv -> batch norm -> ReLU per ConvSpec, then fully connected hidden layers
/// (ReLU, dropout on the first), then a 4-way softmax head. Convolutions pad
/// by kernel / 2.
struct ArchSpec {
  std::size_t input_size = 64;
  std::size_t in_channels = 3;
  std::vector<ConvSpec> convs{{8, 3, 2}, {16, 3, 2}, {32, 3, 2}};
  std::vector<std::size_t> fc_hidden{64};
  double dropout = 0.5;

  void validate() const;  ///< UsageError on an impossible architecture
  std::size_t conv_output_size(std::size_t layer) const;
  std::size_t flat_size() const;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  ///< 0: no step limit
  double learning_rate = 1e-4;
  double learning_rate_low = 1e-6;  ///< convolutional group after warm start
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 2;
  double validation_fraction = 0.1;
  bool augment = true;
  std::uint64_t seed = 0;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class LrGroup : std::uint8_t { kLow, kHigh };

struct ConvParams {
  std::vector<double> w;  ///< [out][in][k][k]
  std::vector<double> gamma, beta;
  std::vector<double> running_mean, running_var;
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct FcParams {
  std::vector<double> w;  ///< [out][in]
  std::vector<double> b;
  friend bool operator==(const FcParams&, const FcParams&) = default;
};

struct Param {
  std::string name;
  std::vector<double>* values;
  LrGroup group;
};
struct ConstParam {
  std::string name;
  const std::vector<double>* values;
  LrGroup group;
};

/// Learned parameters live in double precision but are rounded to binary32
/// after every update so the model file is exact.
struct CnnModel {
  ArchSpec arch;
  std::vector<ConvParams> conv;
  std::vector<FcParams> fc;  ///< hidden layers then the head
  std::optional<ClassThresholds> thresholds;
  bool warm_started = false;
  TrainConfig train_config;

  /// Trainable parameters: convolution and batch-norm in the low group,
  /// fully connected layers in the high group. Running statistics excluded.
  std::vector<Param> parameters();
  std::vector<ConstParam> parameters() const;
  std::size_t parameter_count() const;
  friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

/// He-initialized model (binary32-representable values).
CnnModel make_model(const ArchSpec& arch, std::uint64_t seed);

/// Conv and batch-norm parameters copied from `prev`; fully connected layers
/// re-initialized from `seed` with `fc_hidden` widths. Throws UsageError for
/// an invalid head or when `prev` holds fewer conv layers than its arch.
CnnModel warm_start(const CnnModel& prev, const std::vector<std::size_t>& fc_hidden, std::uint64_t seed);

/// Inference: running batch-norm statistics, no dropout. Throws UsageError
/// on a tile size mismatch.
Probs forward(const CnnModel& model, const Tile& tile);
std::vector<Probs> forward_all(const CnnModel& model, std::span<const Tile> tiles);

using Gradients = std::vector<std::vector<double>>;  ///< aligned with parameters()

struct BatchNormStats {
  std::vector<std::vector<double>> mean, var;  ///< per conv layer
};

/// Training-mode pass over a batch (batch statistics; dropout when `dropout`
/// is non-null). `inputs` holds batch x channels x size x size values.
/// Returns mean cross-entropy; fills gradients when `grads` is non-null.
double loss_and_gradients(const CnnModel& model, std::span<const double> inputs, std::span<const int> labels,
                          Rng* dropout, Gradients* grads, BatchNormStats* stats = nullptr);

/// Adam state for both learning-rate groups.
class Adam {
 public:
  explicit Adam(const CnnModel& model);
  /// One update; rounds parameters to binary32.
  void step(CnnModel& model, const Gradients& grads, double lr_low, double lr_high);
  std::size_t steps() const { return t_; }

 private:
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainReport {
  std::vector<double> step_loss;
  std::vector<double> epoch_monitor_loss;  ///< validation loss (training loss when no split)
  std::vector<double> lr_history;          ///< high-group rate per epoch
  std::size_t steps = 0;
  double train_accuracy = 0.0;  ///< inference mode, training split
};

/// Adam on cross-entropy with seeded batches and 90-degree rotation / flip
/// augmentation; rates drop by plateau_factor when the monitored loss fails to
/// improve for plateau_patience epochs. Throws DataError on a non-finite loss.
TrainReport train_cls(CnnModel& model, std::span<const Tile> tiles, std::span<const int> labels,
                      const TrainConfig& config);

/// Random 90-degree rotation plus optional flips, as used in training.
void augment(std::span<double> chw, std::size_t channels, std::size_t size, Rng& rng);
void rotate90(std::span<double> chw, std::size_t channels, std::size_t size, int quarter_turns);

std::string model_to_text(const CnnModel& model);
CnnModel model_from_text(std::string_view text);
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

}  // namespace povmap::imgcls
