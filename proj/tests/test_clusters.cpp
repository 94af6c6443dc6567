#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "povmap/clusters.hpp"
#include "povmap/error.hpp"

using namespace povmap;
using clusters::CandidateSet;
using clusters::SurveyCluster;

namespace {

const geo::GeoPoint kC{-11.0, 16.0};

places::PopulatedPlace place(std::string id, geo::GeoPoint at) {
  places::PopulatedPlace p;
  p.place_id = std::move(id);
  p.location = at;
  return p;
}

SurveyCluster cluster(bool urban, double iwi = 50.0) {
  return {"k1", "X", kC, urban, iwi};
}

CandidateSet six() {
  CandidateSet s;
  s.cluster_id = "k";
  for (int i = 0; i < 6; ++i) s.candidates.push_back({"p" + std::to_string(i), kC});
  return s;
}

std::unordered_map<std::string, double> six_preds() {
  std::unordered_map<std::string, double> m;
  for (int i = 0; i < 6; ++i) m["p" + std::to_string(i)] = 10.0 * (i + 1);
  return m;
}

}  // namespace

TEST(Candidates, UrbanRadius) {
  const std::vector<places::PopulatedPlace> reg{place("near", geo::destination(kC, 30, 1500)),
                                                place("far", geo::destination(kC, 200, 2500))};
  const spatial::PointIndex idx({reg[0].location, reg[1].location});
  const auto s = clusters::assign_candidates(cluster(true), reg, idx, nullptr);
  ASSERT_EQ(s.candidates.size(), 1u);
  EXPECT_EQ(s.candidates[0].place_id, "near");
  EXPECT_EQ(s.provenance, clusters::Provenance::kRadius);
}

TEST(Candidates, RuralRadius) {
  const std::vector<places::PopulatedPlace> reg{place("edge", geo::destination(kC, 100, 4900)),
                                                place("out", geo::destination(kC, 100, 5100))};
  const spatial::PointIndex idx({reg[0].location, reg[1].location});
  const auto s = clusters::assign_candidates(cluster(false), reg, idx, nullptr);
  ASSERT_EQ(s.candidates.size(), 1u);
  EXPECT_EQ(s.candidates[0].place_id, "edge");
}

TEST(Candidates, QuadrantFallback) {
  auto pop = fixture::grid(80, 80, kC.lat - 0.08, kC.lon - 0.08, 0.002, 1.0);
  const std::vector<places::PopulatedPlace> reg{place("far", geo::destination(kC, 0, 20000))};
  const spatial::PointIndex idx({reg[0].location});
  const auto s = clusters::assign_candidates(cluster(false), reg, idx, &pop);
  EXPECT_EQ(s.provenance, clusters::Provenance::kQuadrantFallback);
  ASSERT_EQ(s.candidates.size(), 4u);
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& c = s.candidates[q];
    EXPECT_EQ(c.place_id, "k1#q" + std::to_string(q));
    EXPECT_LE(geo::haversine_m(kC, c.location), clusters::kRuralRadiusM);
    EXPECT_EQ(static_cast<std::size_t>(geo::bearing_deg(kC, c.location) / 90.0), q);
  }
}

TEST(Candidates, QuadrantPicksMostPopulatedPixel) {
  auto pop = fixture::grid(80, 80, kC.lat - 0.08, kC.lon - 0.08, 0.002, 1.0);
  // Brightest pixel in the north-east quadrant, 2 km out.
  const auto target = geo::destination(kC, 45, 2000);
  const auto row = static_cast<std::size_t>((pop.yll + 80 * 0.002 - target.lat) / 0.002);
  const auto col = static_cast<std::size_t>((target.lon - pop.xll) / 0.002);
  pop.at(row, col) = 900;
  const auto qs = clusters::quadrant_candidates(cluster(false), pop);
  ASSERT_EQ(qs.size(), 4u);
  EXPECT_EQ(qs[0].location, pop.pixel_center(row, col));
}

TEST(Candidates, FallbackAlwaysYieldsWhenGridHasData) {
  std::mt19937_64 rng(6);
  auto pop = fixture::grid(120, 120, kC.lat - 0.12, kC.lon - 0.12, 0.002);
  for (auto& v : pop.values) v = std::uniform_int_distribution<int>(0, 4)(rng) == 0 ? 5.0 : 0.0;
  const spatial::PointIndex none;
  for (int t = 0; t < 50; ++t) {
    SurveyCluster c = cluster(t % 2 == 0);
    c.location = {kC.lat + std::uniform_real_distribution<double>(-0.05, 0.05)(rng),
                  kC.lon + std::uniform_real_distribution<double>(-0.05, 0.05)(rng)};
    const auto s = clusters::assign_candidates(c, {}, none, &pop);
    EXPECT_GE(s.candidates.size(), 1u);
  }
}

TEST(Narrow, SixCandidateRicher) {
  const auto r = clusters::narrow(six(), six_preds(), 55.0);
  EXPECT_EQ(r.subset, (std::vector<std::string>{"p4", "p5"}));
  EXPECT_EQ(r.group, clusters::WealthGroup::kRicher);
  EXPECT_NEAR(r.lower, 80.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.upper, 130.0 / 3.0, 1e-9);
}

TEST(Narrow, SixCandidatePoorerAndMiddle) {
  EXPECT_EQ(clusters::narrow(six(), six_preds(), 5.0).subset, (std::vector<std::string>{"p0", "p1"}));
  EXPECT_EQ(clusters::narrow(six(), six_preds(), 35.0).subset, (std::vector<std::string>{"p2", "p3"}));
}

TEST(Narrow, TwoCandidatesSkipped) {
  CandidateSet s;
  s.candidates = {{"a", kC}, {"b", kC}};
  const auto r = clusters::narrow(s, {{"a", 10}, {"b", 90}}, 95.0);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.subset.size(), 2u);
}

TEST(Narrow, EmptyGroupFallsBackToClosest) {
  CandidateSet s;
  s.candidates = {{"a", kC}, {"b", kC}, {"c", kC}};
  // Lower threshold is 10, so nothing falls in the poorer band.
  const auto r = clusters::narrow(s, {{"a", 10}, {"b", 10}, {"c", 90}}, 5.0);
  EXPECT_TRUE(r.fallback);
  EXPECT_EQ(r.subset, std::vector<std::string>{"a"});
}

TEST(Narrow, OrderInvariantAndIdempotent) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    CandidateSet s;
    std::unordered_map<std::string, double> preds;
    const int n = std::uniform_int_distribution<int>(3, 12)(rng);
    for (int i = 0; i < n; ++i) {
      const std::string id = "c" + std::to_string(i);
      s.candidates.push_back({id, kC});
      preds[id] = std::uniform_int_distribution<int>(0, 10)(rng) * 10.0;
    }
    const double obs = std::uniform_real_distribution<double>(0, 100)(rng);
    const auto a = clusters::narrow(s, preds, obs);
    ASSERT_FALSE(a.subset.empty());
    std::shuffle(s.candidates.begin(), s.candidates.end(), rng);
    EXPECT_EQ(clusters::narrow(s, preds, obs).subset, a.subset);
    EXPECT_EQ(clusters::narrow(s, preds, obs).subset, clusters::narrow(s, preds, obs).subset);
  }
}

TEST(Narrow, MissingPredictionThrows) {
  EXPECT_THROW(clusters::narrow(six(), {{"p0", 1}}, 5.0), DataError);
}

TEST(TrainingRows, MeansOverCandidatesAndSubset) {
  std::vector<SurveyCluster> cs{cluster(true, 40.0), {"k2", "X", kC, true, 70.0}};
  std::vector<CandidateSet> sets(2);
  sets[0].cluster_id = "k1";
  sets[0].candidates = {{"a", kC}};
  sets[1].cluster_id = "k2";
  sets[1].candidates = {{"a", kC}, {"b", kC}, {"c", kC}};
  std::unordered_map<std::string, osm::FeatureVector> f;
  f["a"].values[0] = 1.0;
  f["b"].values[0] = 4.0;
  f["c"].values[0] = 10.0;
  f["a"].values[1] = 3.0;

  auto rows = clusters::training_rows(cs, sets, f, osm::kBaseFeatureCount);
  ASSERT_EQ(rows.rows.size(), 2u);
  EXPECT_EQ(rows.rows[0].x[0], 1.0);
  EXPECT_EQ(rows.rows[0].y, 40.0);
  EXPECT_EQ(rows.rows[1].x[0], 5.0);
  EXPECT_EQ(rows.rows[1].x[1], 1.0);
  EXPECT_EQ(rows.rows[1].x.size(), osm::kBaseFeatureCount);

  sets[1].narrowed = std::vector<std::string>{"b", "c"};
  rows = clusters::training_rows(cs, sets, f, osm::kBaseFeatureCount);
  EXPECT_EQ(rows.rows[1].x[0], 7.0);
  EXPECT_EQ(rows.rows[1].x[1], 0.0);
}

TEST(TrainingRows, MissingFeatureExcludedAndAudited) {
  std::vector<SurveyCluster> cs{cluster(true)};
  std::vector<CandidateSet> sets(1);
  sets[0].cluster_id = "k1";
  sets[0].candidates = {{"ghost", kC}};
  const auto rows = clusters::training_rows(cs, sets, {}, osm::kBaseFeatureCount);
  EXPECT_TRUE(rows.rows.empty());
  EXPECT_EQ(rows.audit.size(), 1u);
}

TEST(ClustersCsv, RoundTripAndValidation) {
  const std::vector<SurveyCluster> cs{{"a", "C1", {-11, 16}, true, 55.5}, {"b", "C2", {-12, 17}, false, 0}};
  const auto back = clusters::parse_clusters(clusters::format_clusters(cs));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].location, cs[0].location);
  EXPECT_EQ(back[0].urban, true);
  EXPECT_EQ(back[1].iwi, 0.0);
  EXPECT_THROW(clusters::parse_clusters("cluster_id,country,lat,lon,urban,iwi\na,C,0,0,1,101\n"), DataError);
}
