#include "povmap/iwi.hpp"

#include <algorithm>
#include <sstream>

#include "iwi_reference_weights.inc"
#include "povmap/csv.hpp"
#include "povmap/format.hpp"

namespace povmap::iwi {
namespace {

using namespace std::string_view_literals;

constexpr std::array<std::string_view, kIndicatorCount> kNames{
    "tv"sv, "fridge"sv, "phone"sv, "bike"sv, "car"sv, "water"sv, "electricity"sv, "rooms"sv, "floor"sv, "toilet"sv};

constexpr std::array<std::string_view, 2> kBinary{"no"sv, "yes"sv};
constexpr std::array<std::string_view, 3> kQuality{"low"sv, "medium"sv, "high"sv};
constexpr std::array<std::string_view, 3> kRoomBands{"zero_or_one"sv, "two"sv, "three_plus"sv};

bool is_binary(Indicator ind) {
  return ind != Indicator::kWater && ind != Indicator::kRooms && ind != Indicator::kFloor &&
         ind != Indicator::kToilet;
}

std::optional<Indicator> indicator_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kIndicatorCount; ++i) {
    if (kNames[i] == name) return static_cast<Indicator>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view indicator_name(Indicator ind) { return kNames[static_cast<std::size_t>(ind)]; }

std::span<const std::string_view> categories(Indicator ind) {
  if (is_binary(ind)) return kBinary;
  if (ind == Indicator::kRooms) return kRoomBands;
  return kQuality;
}

std::optional<std::uint8_t> category_index(Indicator ind, std::string_view label) {
  label = trim(label);
  const auto cats = categories(ind);
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (cats[i] == label) return static_cast<std::uint8_t>(i);
  }
  if (is_binary(ind)) {
    if (label == "0") return 0;
    if (label == "1") return 1;
    return std::nullopt;
  }
  if (ind == Indicator::kRooms && !label.empty() &&
      std::all_of(label.begin(), label.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const long long rooms = parse_int(label, "sleeping rooms");
    return static_cast<std::uint8_t>(rooms <= 1 ? 0 : rooms == 2 ? 1 : 2);
  }
  return std::nullopt;
}

std::size_t HouseholdRecord::missing_count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::nullopt));
}

IwiWeights::IwiWeights(std::string version, double constant) : version_(std::move(version)), constant_(constant) {}

double IwiWeights::weight(Indicator ind, std::uint8_t category) const {
  const auto i = static_cast<std::size_t>(ind);
  if (category >= categories(ind).size()) throw DataError("category out of range for " + std::string(kNames[i]));
  return table_[i][category];
}

void IwiWeights::set_weight(Indicator ind, std::uint8_t category, double w) {
  const auto i = static_cast<std::size_t>(ind);
  if (category >= categories(ind).size()) throw DataError("category out of range for " + std::string(kNames[i]));
  table_[i][category] = w;
}

IwiWeights IwiWeights::parse(std::string_view text, std::string_view source) {
  const std::string where(source);
  std::istringstream in{std::string(text)};
  std::string line;
  std::optional<std::string> version;
  std::optional<double> constant;
  std::array<std::array<bool, 3>, kIndicatorCount> seen{};
  IwiWeights w("", 0.0);
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto space = body.find_first_of(" \t");
    if (space == std::string_view::npos) {
      throw DataError(where + ":" + std::to_string(lineno) + ": expected '<key> <value>'");
    }
    const std::string_view key = body.substr(0, space);
    const std::string_view value = trim(body.substr(space));
    if (key == "version") {
      version = std::string(value);
      continue;
    }
    if (key == "constant") {
      constant = parse_double(value, "constant");
      continue;
    }
    const auto dot = key.find('.');
    const auto ind = dot == std::string_view::npos ? std::nullopt : indicator_from_name(key.substr(0, dot));
    if (!ind) throw DataError(where + ":" + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
    const auto cats = categories(*ind);
    const auto cat_label = key.substr(dot + 1);
    const auto it = std::find(cats.begin(), cats.end(), cat_label);
    if (it == cats.end()) {
      throw DataError(where + ":" + std::to_string(lineno) + ": unknown category '" + std::string(key) + "'");
    }
    const auto cat = static_cast<std::uint8_t>(it - cats.begin());
    w.set_weight(*ind, cat, parse_double(value, key));
    seen[static_cast<std::size_t>(*ind)][cat] = true;
  }
  if (!version) throw DataError(where + ": weight file needs a 'version' entry");
  if (!constant) throw DataError(where + ": weight file needs a 'constant' entry");
  for (std::size_t i = 0; i < kIndicatorCount; ++i) {
    const auto ind = static_cast<Indicator>(i);
    for (std::size_t c = 0; c < categories(ind).size(); ++c) {
      if (!seen[i][c]) {
        throw DataError(where + ": missing weight for " + std::string(kNames[i]) + "." +
                        std::string(categories(ind)[c]));
      }
    }
  }
  w.version_ = *version;
  w.constant_ = *constant;
  return w;
}

IwiWeights IwiWeights::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

IwiWeights IwiWeights::reference() {
  static const IwiWeights w = parse(detail::kReferenceWeights, "reference weights");
  return w;
}

IwiScore compute_iwi(const HouseholdRecord& h, const IwiWeights& w) {
  const std::size_t missing = h.missing_count();
  if (missing > kMaxMissing) {
    throw UnscoreableRecord("household '" + h.household_id + "' has " + std::to_string(missing) +
                            " missing indicators (at most 3 allowed)");
  }
  double score = w.constant();
  for (std::size_t i = 0; i < kIndicatorCount; ++i) {
    const auto ind = static_cast<Indicator>(i);
    score += h.values[i] ? w.weight(ind, *h.values[i]) : w.lowest_weight(ind);
  }
  return {std::clamp(score, 0.0, 100.0), missing};
}

ClusterIwiResult cluster_iwi(std::span<const HouseholdRecord> records, const IwiWeights& w) {
  if (records.empty()) throw DataError("cluster_iwi: no household records");
  struct Acc {
    std::vector<double> scores;
    std::size_t imputed = 0;
    std::size_t rejected = 0;
  };
  std::map<std::string, Acc> by_cluster;
  ClusterIwiResult result;
  for (const auto& h : records) {
    Acc& acc = by_cluster[h.cluster_id];
    try {
      const IwiScore s = compute_iwi(h, w);
      acc.scores.push_back(s.value);
      if (s.flagged()) ++acc.imputed;
    } catch (const UnscoreableRecord&) {
      ++acc.rejected;
      result.rejected_households.push_back(h.household_id);
    }
  }
  std::sort(result.rejected_households.begin(), result.rejected_households.end());
  for (auto& [id, acc] : by_cluster) {
    if (acc.scores.empty()) {
      result.unscoreable_clusters.push_back(id);
      continue;
    }
    std::sort(acc.scores.begin(), acc.scores.end());
    double sum = 0.0;
    for (double s : acc.scores) sum += s;
    result.clusters.push_back({id, sum / static_cast<double>(acc.scores.size()), acc.scores.size(), acc.imputed,
                               acc.rejected});
  }
  return result;
}

std::vector<HouseholdRecord> parse_households(std::string_view text, std::string_view source) {
  const CsvTable t = parse_csv(text, source);
  const std::size_t hid = t.column("household_id");
  const std::size_t cid = t.column("cluster_id");
  std::array<std::size_t, kIndicatorCount> cols{};
  for (std::size_t i = 0; i < kIndicatorCount; ++i) cols[i] = t.column(kNames[i]);

  std::vector<HouseholdRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    HouseholdRecord h;
    h.household_id = row[hid];
    h.cluster_id = row[cid];
    for (std::size_t i = 0; i < kIndicatorCount; ++i) {
      const std::string_view cell = trim(row[cols[i]]);
      if (cell.empty()) continue;
      const auto ind = static_cast<Indicator>(i);
      const auto cat = category_index(ind, cell);
      if (!cat) {
        throw DataError(std::string(source) + ": household '" + h.household_id + "': '" + std::string(cell) +
                        "' is not a category of " + std::string(kNames[i]));
      }
      h.values[i] = *cat;
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<HouseholdRecord> read_households(const std::filesystem::path& path) {
  return parse_households(read_text_file(path), path.string());
}

}  // namespace povmap::iwi
