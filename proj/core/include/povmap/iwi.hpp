#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "povmap/error.hpp"

namespace povmap::iwi {

/// A household with more than three missing indicators.
class UnscoreableRecord : public DataError {
 public:
  using DataError::DataError;
};

/// The ten household indicators, in CSV column order.
enum class Indicator : std::uint8_t {
  kTv,
  kFridge,
  kPhone,
  kBike,
  kCar,
  kWater,
  kElectricity,
  kRooms,
  kFloor,
  kToilet,
};
inline constexpr std::size_t kIndicatorCount = 10;
inline constexpr std::size_t kMaxMissing = 3;

std::string_view indicator_name(Indicator ind);
/// Category labels of an indicator, lowest (poorest) first.
std::span<const std::string_view> categories(Indicator ind);
/// Category index for a label; also accepts 0/1 for binary indicators and a
/// bare room count for the sleeping-room band. nullopt when unknown.
std::optional<std::uint8_t> category_index(Indicator ind, std::string_view label);

struct HouseholdRecord {
  std::string household_id;
  std::string cluster_id;
  /// Category index per indicator; nullopt marks a missing answer.
  std::array<std::optional<std::uint8_t>, kIndicatorCount> values{};

  std::size_t missing_count() const;
};

class IwiWeights {
 public:
  /// Parses the key-value weight file; every category needs an entry.
  static IwiWeights parse(std::string_view text, std::string_view source = "<memory>");
  static IwiWeights load(const std::filesystem::path& path);
  /// The reference table shipped with the library.
  static IwiWeights reference();

  /// Weights built in code; unspecified categories weigh 0.
  IwiWeights(std::string version, double constant);

  const std::string& version() const { return version_; }
  double constant() const { return constant_; }
  double weight(Indicator ind, std::uint8_t category) const;
  void set_weight(Indicator ind, std::uint8_t category, double w);
  /// Weight of the lowest category, used for missing answers.
  double lowest_weight(Indicator ind) const { return weight(ind, 0); }

 private:
  std::string version_;
  double constant_ = 0.0;
  std::array<std::array<double, 3>, kIndicatorCount> table_{};
};

struct IwiScore {
  double value = 0.0;          ///< clamped to [0, 100]
  std::size_t imputed = 0;     ///< missing indicators replaced by their lowest category
  bool flagged() const { return imputed > 0; }
};

/// Household score. Throws UnscoreableRecord for more than three missing answers.
IwiScore compute_iwi(const HouseholdRecord& h, const IwiWeights& w);

struct ClusterIwi {
  std::string cluster_id;
  double mean = 0.0;
  std::size_t households = 0;  ///< scoreable households averaged
  std::size_t imputed_households = 0;
  std::size_t rejected = 0;    ///< households with too many missing answers
};

struct ClusterIwiResult {
  std::vector<ClusterIwi> clusters;             ///< sorted by cluster_id
  std::vector<std::string> unscoreable_clusters;  ///< no scoreable household at all
  std::vector<std::string> rejected_households;
};

/// Mean household score per cluster. The mean sums scores in ascending order,
/// so the result does not depend on record order. Throws DataError when empty.
ClusterIwiResult cluster_iwi(std::span<const HouseholdRecord> records, const IwiWeights& w);

/// Household CSV: household_id,cluster_id followed by one column per indicator;
/// an empty field marks a missing answer.
std::vector<HouseholdRecord> read_households(const std::filesystem::path& path);
std::vector<HouseholdRecord> parse_households(std::string_view text, std::string_view source = "<memory>");

}  // namespace povmap::iwi
