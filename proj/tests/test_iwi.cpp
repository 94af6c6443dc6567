#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "povmap/iwi.hpp"

using namespace povmap;
using iwi::Indicator;

namespace {

iwi::HouseholdRecord all_lowest(std::string id, std::string cluster) {
  iwi::HouseholdRecord h;
  h.household_id = std::move(id);
  h.cluster_id = std::move(cluster);
  for (auto& v : h.values) v = 0;
  return h;
}

iwi::IwiWeights tv_only() {
  iwi::IwiWeights w("test", 20.0);
  w.set_weight(Indicator::kTv, 1, 10.0);
  return w;
}

}  // namespace

TEST(Iwi, LinearFormWithTestWeights) {
  const auto w = tv_only();
  auto h = all_lowest("h1", "c1");
  EXPECT_DOUBLE_EQ(iwi::compute_iwi(h, w).value, 20.0);
  h.values[static_cast<std::size_t>(Indicator::kTv)] = 1;
  EXPECT_DOUBLE_EQ(iwi::compute_iwi(h, w).value, 30.0);
}

TEST(Iwi, ReferenceMatchesSpreadsheetOracle) {
  const oracle::IwiSheet sheet(POVMAP_SOURCE_DIR "/core/data/iwi_weights.txt");
  const auto hh = fixture::random_households(300, 3, 42);
  const auto records = iwi::parse_households(hh.csv);
  ASSERT_EQ(records.size(), hh.answers.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto s = iwi::compute_iwi(records[i], iwi::IwiWeights::reference());
    EXPECT_NEAR(s.value, sheet.score(hh.answers[i]), 1e-9);
    EXPECT_EQ(s.imputed, hh.missing[i]);
  }
}

TEST(Iwi, FullAssetBundle) {
  const oracle::IwiSheet sheet(POVMAP_SOURCE_DIR "/core/data/iwi_weights.txt");
  fixture::Answers full;
  std::string row = "h,c";
  for (const auto& [name, cats] : fixture::indicators()) {
    full[name] = cats.back();
    row += "," + cats.back();
  }
  const auto recs = iwi::parse_households(
      "household_id,cluster_id,tv,fridge,phone,bike,car,water,electricity,rooms,floor,toilet\n" + row + "\n");
  EXPECT_NEAR(iwi::compute_iwi(recs[0], iwi::IwiWeights::reference()).value, sheet.score(full), 1e-9);
}

TEST(Iwi, FourMissingIsUnscoreable) {
  auto h = all_lowest("h", "c");
  for (int i = 0; i < 3; ++i) h.values[i] = std::nullopt;
  EXPECT_NO_THROW(iwi::compute_iwi(h, iwi::IwiWeights::reference()));
  h.values[3] = std::nullopt;
  EXPECT_THROW(iwi::compute_iwi(h, iwi::IwiWeights::reference()), iwi::UnscoreableRecord);
}

TEST(Iwi, MissingTakesLowestCategory) {
  const auto w = iwi::IwiWeights::reference();
  auto h = all_lowest("h", "c");
  const double base = iwi::compute_iwi(h, w).value;
  h.values[static_cast<std::size_t>(Indicator::kWater)] = std::nullopt;
  const auto s = iwi::compute_iwi(h, w);
  EXPECT_DOUBLE_EQ(s.value, base);
  EXPECT_TRUE(s.flagged());
}

TEST(Iwi, ScoreStaysInRange) {
  iwi::IwiWeights w("extreme", 90.0);
  w.set_weight(Indicator::kCar, 1, 50.0);
  w.set_weight(Indicator::kCar, 0, -200.0);
  auto h = all_lowest("h", "c");
  EXPECT_DOUBLE_EQ(iwi::compute_iwi(h, w).value, 0.0);
  h.values[static_cast<std::size_t>(Indicator::kCar)] = 1;
  EXPECT_DOUBLE_EQ(iwi::compute_iwi(h, w).value, 100.0);
}

TEST(Iwi, AddingPositiveAssetNeverLowersScore) {
  const auto w = iwi::IwiWeights::reference();
  const auto hh = iwi::parse_households(fixture::random_households(200, 0, 5).csv);
  for (auto h : hh) {
    for (Indicator ind : {Indicator::kTv, Indicator::kFridge, Indicator::kPhone, Indicator::kBike, Indicator::kCar,
                          Indicator::kElectricity}) {
      const double before = iwi::compute_iwi(h, w).value;
      h.values[static_cast<std::size_t>(ind)] = 1;
      EXPECT_GE(iwi::compute_iwi(h, w).value, before);
    }
  }
}

TEST(Iwi, ClusterMeanSingleAndPair) {
  const auto w = tv_only();
  auto a = all_lowest("a", "c1");
  std::vector<iwi::HouseholdRecord> one{a};
  auto r = iwi::cluster_iwi(one, w);
  ASSERT_EQ(r.clusters.size(), 1u);
  EXPECT_DOUBLE_EQ(r.clusters[0].mean, 20.0);

  iwi::IwiWeights w2("t", 20.0);
  w2.set_weight(Indicator::kCar, 1, 20.0);
  auto b = all_lowest("b", "c1");
  b.values[static_cast<std::size_t>(Indicator::kCar)] = 1;
  std::vector<iwi::HouseholdRecord> two{a, b};
  EXPECT_DOUBLE_EQ(iwi::cluster_iwi(two, w2).clusters[0].mean, 30.0);
}

TEST(Iwi, ClusterMeanIndependentOfOrder) {
  auto recs = iwi::parse_households(fixture::random_households(500, 4, 9).csv);
  const auto w = iwi::IwiWeights::reference();
  const auto first = iwi::cluster_iwi(recs, w);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto again = iwi::cluster_iwi(recs, w);
    ASSERT_EQ(again.clusters.size(), first.clusters.size());
    for (std::size_t i = 0; i < first.clusters.size(); ++i) {
      EXPECT_EQ(again.clusters[i].mean, first.clusters[i].mean);
      EXPECT_EQ(again.clusters[i].rejected, first.clusters[i].rejected);
    }
    EXPECT_EQ(again.rejected_households, first.rejected_households);
  }
}

TEST(Iwi, UnscoreableClusterReported) {
  auto h = all_lowest("h", "lonely");
  for (int i = 0; i < 5; ++i) h.values[i] = std::nullopt;
  std::vector<iwi::HouseholdRecord> recs{h, all_lowest("g", "ok")};
  const auto r = iwi::cluster_iwi(recs, iwi::IwiWeights::reference());
  ASSERT_EQ(r.unscoreable_clusters.size(), 1u);
  EXPECT_EQ(r.unscoreable_clusters[0], "lonely");
  EXPECT_EQ(r.rejected_households, std::vector<std::string>{"h"});
  EXPECT_THROW(iwi::cluster_iwi(std::vector<iwi::HouseholdRecord>{}, iwi::IwiWeights::reference()), DataError);
}

TEST(Iwi, WeightFileValidation) {
  EXPECT_THROW(iwi::IwiWeights::parse("constant 1\n"), DataError);
  EXPECT_THROW(iwi::IwiWeights::parse("version v\nconstant 1\ntv.no 0\n"), DataError);
  EXPECT_THROW(iwi::IwiWeights::parse("version v\nconstant 1\ntv.maybe 0\n"), DataError);
  EXPECT_EQ(iwi::IwiWeights::reference().version(), "iwi-2015-no-utensils");
}

TEST(Iwi, CategoryLabels) {
  EXPECT_EQ(iwi::category_index(Indicator::kTv, "1"), 1);
  EXPECT_EQ(iwi::category_index(Indicator::kRooms, "1"), 0);
  EXPECT_EQ(iwi::category_index(Indicator::kRooms, "2"), 1);
  EXPECT_EQ(iwi::category_index(Indicator::kRooms, "5"), 2);
  EXPECT_EQ(iwi::category_index(Indicator::kFloor, "high"), 2);
  EXPECT_FALSE(iwi::category_index(Indicator::kFloor, "marble").has_value());
}
