#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "povmap/error.hpp"
#include "povmap/manifest.hpp"

using namespace povmap;

namespace {

const char* kFiles[] = {"clusters.csv", "a.csv", "pop.asc", "ways.geojson", "pois.csv", "b.geojson"};

std::filesystem::path setup() {
  const auto dir = fixture::temp_dir("manifest");
  for (const char* f : kFiles) fixture::write_file(dir / f, "");
  return dir;
}

nlohmann::json base() {
  return nlohmann::json::parse(R"({
    "seed": 5, "output_dir": "out", "clusters": "clusters.csv",
    "countries": [{"name": "A", "list_a": "a.csv", "population": "pop.asc", "ways": "ways.geojson",
                   "pois": "pois.csv", "buildings": "b.geojson"}]
  })");
}

std::string usage_message(const nlohmann::json& doc, const std::filesystem::path& dir) {
  try {
    parse_manifest(doc.dump(), dir);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Manifest, ParsesAndResolvesPaths) {
  const auto dir = setup();
  const auto m = parse_manifest(base().dump(), dir);
  EXPECT_EQ(m.seed, 5u);
  EXPECT_EQ(m.refine.seed, 5u);
  EXPECT_EQ(m.output_dir, dir / "out");
  ASSERT_EQ(m.countries.size(), 1u);
  EXPECT_EQ(m.countries[0].ways, dir / "ways.geojson");
  EXPECT_TRUE(m.countries[0].list_b.empty());
  EXPECT_EQ(m.inputs().size(), 6u);
}

TEST(Manifest, UnknownKeyNamed) {
  const auto dir = setup();
  auto doc = base();
  doc["countries"][0]["roads"] = "x";
  EXPECT_NE(usage_message(doc, dir).find("countries[0].roads"), std::string::npos);
  doc = base();
  doc["refine"] = {{"iteratons", 3}};
  EXPECT_NE(usage_message(doc, dir).find("iteratons"), std::string::npos);
}

TEST(Manifest, SeedRequired) {
  const auto dir = setup();
  auto doc = base();
  doc.erase("seed");
  EXPECT_NE(usage_message(doc, dir).find("seed"), std::string::npos);
}

TEST(Manifest, MissingFileNamesKey) {
  const auto dir = setup();
  std::filesystem::remove(dir / "pois.csv");
  EXPECT_NE(usage_message(base(), dir).find("countries[0].pois"), std::string::npos);
  EXPECT_NO_THROW(parse_manifest(base().dump(), dir, false));
}

TEST(Manifest, PipelineOverrides) {
  const auto dir = setup();
  auto doc = base();
  doc["refine"] = {{"iterations", 3}, {"k", 4}, {"metric", "ssres"}, {"protocols", {"loco"}}};
  doc["gbt"] = {{"max_depth", 6}};
  doc["cnn"] = {{"arch", {{"input_size", 32}}}, {"train", {{"epochs", 1}}}};
  doc["overrides"] = {nullptr, {{"fc_hidden", {8}}}};
  const auto m = parse_manifest(doc.dump(), dir);
  EXPECT_EQ(m.refine.iterations, 3u);
  EXPECT_EQ(m.refine.k, 4u);
  EXPECT_EQ(m.refine.metric, validate::Metric::kSsres);
  EXPECT_EQ(m.refine.protocols, std::vector<validate::Protocol>{validate::Protocol::kLoco});
  EXPECT_EQ(m.refine.gbt.max_depth, 6);
  EXPECT_EQ(m.refine.arch.input_size, 32u);
  EXPECT_EQ(m.refine.cnn.epochs, 1u);
  ASSERT_EQ(m.refine.overrides.size(), 2u);
  EXPECT_FALSE(m.refine.overrides[0].fc_hidden.has_value());
  EXPECT_EQ(*m.refine.overrides[1].fc_hidden, std::vector<std::size_t>{8});

  doc["refine"]["metric"] = "r2";
  EXPECT_THROW(parse_manifest(doc.dump(), dir), UsageError);
  EXPECT_THROW(parse_manifest("{not json", dir), UsageError);
}
