#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "povmap/error.hpp"
#include "povmap/osm_features.hpp"

using namespace povmap;
using geo::GeoPoint;
using osm::Way;

namespace {

const GeoPoint kP{-11.0, 16.0};

std::string line_feature(const std::string& id, const std::string& coords, const std::string& highway = "tertiary",
                         const std::string& surface = "asphalt") {
  return R"({"type":"Feature","properties":{"id":")" + id + R"(","highway":")" + highway + R"(","surface":")" +
         surface + R"("},"geometry":{"type":"LineString","coordinates":)" + coords + "}}";
}

std::string collection(const std::vector<std::string>& features) {
  std::string s = R"({"type":"FeatureCollection","features":[)";
  for (std::size_t i = 0; i < features.size(); ++i) s += (i ? "," : "") + features[i];
  return s + "]}";
}

std::vector<GeoPoint> square(const GeoPoint& center, double east_m, double side_m) {
  const double h = side_m / 2;
  std::vector<GeoPoint> r;
  for (auto [x, y] : std::vector<std::pair<double, double>>{{-h, -h}, {h, -h}, {h, h}, {-h, h}, {-h, -h}}) {
    r.push_back(geo::unproject_local(center, {east_m + x, y}));
  }
  return r;
}

std::size_t poi(std::string_view name) { return *osm::parse_poi_category(name); }

}  // namespace

TEST(OsmLayers, EmptyInputs) {
  const auto l = osm::parse_layers("", "", "");
  EXPECT_TRUE(l.ways.empty());
  EXPECT_TRUE(l.pois.empty());
  EXPECT_TRUE(l.buildings.empty());
  EXPECT_EQ(l.warnings, 0u);
  EXPECT_TRUE(l.rejects.empty());
}

TEST(OsmLayers, SinglePointWayRejected) {
  const auto l = osm::parse_layers(collection({line_feature("w1", "[[16.0,-11.0]]")}), "", "");
  EXPECT_TRUE(l.ways.empty());
  ASSERT_EQ(l.rejects.size(), 1u);
  EXPECT_EQ(l.rejects[0].record_id, "w1");
}

TEST(OsmLayers, MixedFileKeepsValidSubset) {
  const std::string ways = collection({
      line_feature("ok1", "[[16.0,-11.0],[16.01,-11.0]]"),
      line_feature("bad1", "[[16.0,-11.0]]"),
      line_feature("ok2", "[[16.0,-11.0],[16.0,-11.01]]", "primary", "dirt"),
      line_feature("bad2", "[[16.0,-95.0],[16.0,-11.0]]"),
      line_feature("skip", "[[16.0,-11.0],[16.1,-11.0]]", "footway"),
  });
  const std::string pois = "poi_id,category,lat,lon\np1,school,-11,16\np2,fast food,-11.01,16\np3,casino,-11,16\n";
  const std::string buildings = collection({
      R"({"type":"Feature","properties":{"id":"b1"},"geometry":{"type":"Polygon","coordinates":[[[16,-11],[16.0002,-11],[16.0002,-10.9998],[16,-10.9998],[16,-11]]]}})",
      R"({"type":"Feature","properties":{"id":"bow"},"geometry":{"type":"Polygon","coordinates":[[[16,-11],[16.0002,-10.9998],[16.0002,-11],[16,-10.9998],[16,-11]]]}})",
  });
  const auto l = osm::parse_layers(ways, pois, buildings);
  ASSERT_EQ(l.ways.size(), 2u);
  EXPECT_EQ(l.ways[1].surface, osm::Surface::kUnpaved);
  EXPECT_EQ(l.pois.size(), 2u);
  EXPECT_EQ(l.buildings.size(), 1u);
  EXPECT_EQ(l.rejects.size(), 3u);
  EXPECT_EQ(l.warnings, 2u);
}

TEST(OsmLayers, WriterRoundTrip) {
  std::vector<Way> ways{fixture::way("w", {{-11, 16}, {-11.001, 16.002}}, osm::Surface::kUnpaved)};
  std::vector<osm::Poi> pois{{"p", {-11, 16}, 3}};
  std::vector<osm::Building> bs{osm::make_building("b", square(kP, 0, 20))};
  const auto l = osm::parse_layers(osm::format_ways(ways), osm::format_pois(pois), osm::format_buildings(bs));
  ASSERT_EQ(l.ways.size(), 1u);
  EXPECT_EQ(l.ways[0].points, ways[0].points);
  EXPECT_EQ(l.ways[0].surface, osm::Surface::kUnpaved);
  EXPECT_EQ(l.pois[0].category, 3);
  EXPECT_NEAR(l.buildings[0].area_m2, 400.0, 0.5);
}

TEST(OsmLayers, BuildingValidation) {
  EXPECT_NEAR(osm::make_building("b", square(kP, 0, 10)).area_m2, 100.0, 0.1);
  auto open = square(kP, 0, 10);
  open.pop_back();
  EXPECT_THROW(osm::make_building("b", open), DataError);
  const std::vector<GeoPoint> bow{{-11, 16}, {-10.999, 16.001}, {-11, 16.001}, {-10.999, 16}, {-11, 16}};
  EXPECT_TRUE(osm::ring_self_intersects(bow));
  EXPECT_THROW(osm::make_building("b", bow), DataError);
}

TEST(Junctions, CrossingInteriorNode) {
  const GeoPoint c{-11, 16};
  const std::vector<Way> ways{fixture::way("a", {{-11, 15.99}, c, {-11, 16.01}}),
                              fixture::way("b", {{-11.01, 16}, c, {-10.99, 16}})};
  const auto j = osm::detect_junctions(ways);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0], c);
}

TEST(Junctions, TwoEndpointsIsNotAJunction) {
  const GeoPoint c{-11, 16};
  const std::vector<Way> ways{fixture::way("a", {{-11, 15.99}, c}), fixture::way("b", {c, {-10.99, 16}})};
  EXPECT_TRUE(osm::detect_junctions(ways).empty());
}

TEST(Junctions, ThreeEndpoints) {
  const GeoPoint c{-11, 16};
  const std::vector<Way> ways{fixture::way("a", {{-11, 15.99}, c}), fixture::way("b", {c, {-10.99, 16}}),
                              fixture::way("c", {c, {-11.01, 16}})};
  EXPECT_EQ(osm::detect_junctions(ways).size(), 1u);
}

TEST(Junctions, RandomNetworksMatchOracleAndOrder) {
  std::mt19937_64 rng(5);
  std::vector<GeoPoint> nodes;
  for (int i = 0; i < 6; ++i) {
    for (int k = 0; k < 6; ++k) nodes.push_back({-11 + 0.001 * i, 16 + 0.001 * k});
  }
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Way> ways;
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int w = 0; w < n; ++w) {
      std::vector<GeoPoint> pts;
      const int len = std::uniform_int_distribution<int>(2, 5)(rng);
      for (int p = 0; p < len; ++p) pts.push_back(nodes[pick(rng)]);
      ways.push_back(fixture::way("w" + std::to_string(w), pts));
    }
    auto expect = oracle::junctions(ways);
    std::sort(expect.begin(), expect.end(), [](auto& a, auto& b) { return std::pair(a.lat, a.lon) < std::pair(b.lat, b.lon); });
    EXPECT_EQ(osm::detect_junctions(ways), expect);
    std::shuffle(ways.begin(), ways.end(), rng);
    EXPECT_EQ(osm::detect_junctions(ways), expect);
  }
}

TEST(RoadStats, StraightWayInside) {
  const GeoPoint a = geo::destination(kP, 180, 500), b = geo::destination(kP, 0, 500);
  const std::vector<Way> ways{fixture::way("w", {a, b})};
  const auto s = osm::road_stats(ways, geo::cell_window(kP, geo::WindowSpec(1.6)));
  EXPECT_NEAR(s.total_m, oracle::haversine(a, b), 1.0);
  EXPECT_NEAR(s.total_m, 1000.0, 1.0);
  EXPECT_EQ(s.paved_m, s.total_m);
}

TEST(RoadStats, OutsideAndHalfInside) {
  const auto cell = geo::cell_window(kP, geo::WindowSpec(1.6));
  const GeoPoint far1 = geo::destination(kP, 90, 3000), far2 = geo::destination(kP, 90, 4000);
  EXPECT_EQ(osm::road_stats(std::vector<Way>{fixture::way("w", {far1, far2})}, cell).total_m, 0.0);

  // Straddles the northern edge: half of 600 m inside.
  const GeoPoint edge{cell.max_lat, kP.lon};
  const GeoPoint a = geo::destination(edge, 180, 300), b = geo::destination(edge, 0, 300);
  const auto s = osm::road_stats(std::vector<Way>{fixture::way("w", {a, b}, osm::Surface::kUnknown)}, cell);
  EXPECT_NEAR(s.total_m, 300.0, 1.0);
  EXPECT_EQ(s.unknown_m, s.total_m);
}

TEST(Features, EmptyLayersZeroGrids) {
  const osm::LayerSet layers;
  const auto lum = fixture::grid(100, 100, -11.2, 15.8, 0.004);
  const auto pop = fixture::grid(100, 100, -11.2, 15.8, 0.004);
  const osm::FeatureExtractor fx(layers, &lum, &pop);
  const auto fv = fx.extract(kP);
  for (std::size_t i = 0; i < osm::kFeatureCount; ++i) {
    const bool is_distance =
        i == osm::kColDistRoad || i == osm::kColDistJunction ||
        (i >= osm::kColPoiBegin && i < osm::kColLumBegin && (i - osm::kColPoiBegin) % 2 == 1);
    const bool zero_ratio = i >= osm::kColLumBegin && i < osm::kColPopBegin && (i - osm::kColLumBegin) % 6 == 3;
    const double expect = is_distance ? osm::kDistanceCapM : zero_ratio ? 1.0 : 0.0;
    EXPECT_EQ(fv.values[i], expect) << osm::feature_names()[i];
  }
  EXPECT_EQ(fv.active_width(), osm::kBaseFeatureCount);
}

TEST(Features, FiveObjectFixture) {
  osm::LayerSet layers;
  layers.ways.push_back(fixture::way("road", {geo::destination(kP, 180, 500), geo::destination(kP, 0, 500)}));
  layers.pois.push_back({"school", kP, static_cast<std::uint8_t>(poi("school"))});
  layers.pois.push_back({"hosp", geo::destination(kP, 0, 2000), static_cast<std::uint8_t>(poi("hospital"))});
  layers.buildings.push_back(osm::make_building("house", square(kP, 100, 20)));
  layers.buildings.push_back(osm::make_building("far", square(geo::destination(kP, 90, 5000), 0, 10)));
  const osm::FeatureExtractor fx(layers, nullptr, nullptr);
  const auto v = fx.extract(kP).values;
  EXPECT_NEAR(v[osm::kColRoadTotal], 1000.0, 1.0);
  EXPECT_NEAR(v[osm::kColRoadPaved], 1000.0, 1.0);
  EXPECT_NEAR(v[osm::kColDistRoad], 0.0, 1e-6);
  EXPECT_EQ(v[osm::kColJunctionCount], 0.0);
  EXPECT_EQ(v[osm::kColDistJunction], osm::kDistanceCapM);
  EXPECT_EQ(v[osm::kColBuildingCount], 1.0);
  EXPECT_NEAR(v[osm::kColBuildingArea], 400.0, 0.5);
  EXPECT_EQ(v[osm::kColPoiBegin + 2 * poi("school")], 1.0);
  EXPECT_EQ(v[osm::kColPoiBegin + 2 * poi("school") + 1], 0.0);
  EXPECT_EQ(v[osm::kColPoiBegin + 2 * poi("hospital")], 0.0);
  EXPECT_NEAR(v[osm::kColPoiBegin + 2 * poi("hospital") + 1], 2000.0, 1e-6);
  EXPECT_EQ(v[osm::kColPoiBegin + 2 * poi("bank") + 1], osm::kDistanceCapM);
}

TEST(Features, PoiStatsMatchBruteForce) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  osm::LayerSet layers;
  for (int i = 0; i < 400; ++i) {
    layers.pois.push_back({"p" + std::to_string(i), {kP.lat + d(rng), kP.lon + d(rng)},
                           static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 5)(rng))});
  }
  const osm::FeatureExtractor fx(layers, nullptr, nullptr);
  for (int t = 0; t < 50; ++t) {
    const GeoPoint q{kP.lat + d(rng), kP.lon + d(rng)};
    const auto v = fx.extract(q).values;
    const auto cell = geo::cell_window(q, geo::WindowSpec(1.6));
    for (std::size_t c = 0; c < osm::kPoiCategoryCount; ++c) {
      std::size_t count = 0;
      double best = osm::kDistanceCapM;
      for (const auto& p : layers.pois) {
        if (p.category != c) continue;
        count += cell.contains(p.location);
        best = std::min(best, oracle::haversine(q, p.location));
      }
      EXPECT_EQ(v[osm::kColPoiBegin + 2 * c], static_cast<double>(count));
      EXPECT_NEAR(v[osm::kColPoiBegin + 2 * c + 1], best, 1e-6 * std::max(1.0, best));
    }
  }
}

TEST(Features, ColumnLayoutAndDeterminism) {
  EXPECT_EQ(osm::kFeatureCount, 82u);
  EXPECT_EQ(osm::feature_names().size(), osm::kFeatureCount);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> d(-0.03, 0.03);
  osm::LayerSet layers;
  for (int i = 0; i < 40; ++i) {
    GeoPoint a{kP.lat + d(rng), kP.lon + d(rng)};
    layers.ways.push_back(fixture::way("w" + std::to_string(i), {a, {a.lat + 0.003, a.lon + 0.002}}));
  }
  auto pop = fixture::grid(100, 100, -11.2, 15.8, 0.004);
  for (auto& v : pop.values) v = std::uniform_int_distribution<int>(0, 30)(rng);
  const osm::FeatureExtractor fx(layers, &pop, &pop);
  std::vector<GeoPoint> at;
  for (int i = 0; i < 64; ++i) at.push_back({kP.lat + d(rng), kP.lon + d(rng)});
  const auto all = fx.extract_all(at);
  for (std::size_t i = 0; i < at.size(); ++i) EXPECT_EQ(all[i].values, fx.extract(at[i]).values);
  std::vector<osm::FeatureRow> rows;
  for (std::size_t i = 0; i < at.size(); ++i) rows.push_back({"r" + std::to_string(i), at[i], all[i]});
  const auto text = osm::format_feature_table(rows);
  const auto back = osm::parse_feature_table(text);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(back[i].features.values, rows[i].features.values);
  EXPECT_EQ(osm::format_feature_table(back), text);
}

TEST(Features, ImageProbabilitiesWidenActiveColumns) {
  osm::FeatureVector fv;
  const std::array<double, 4> p{0.1, 0.2, 0.3, 0.4};
  fv.set_image_probs(p);
  EXPECT_EQ(fv.active_width(), osm::kBaseFeatureCount + 4);
  EXPECT_EQ(fv.values[osm::kColImageBegin + 3], 0.4);
}
