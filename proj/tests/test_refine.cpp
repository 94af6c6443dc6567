#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "povmap/error.hpp"
#include "povmap/manifest.hpp"
#include "povmap/pipeline.hpp"
#include "povmap/refine.hpp"

using namespace povmap;
using namespace povmap::refine;

namespace {

struct Tiny {
  Manifest manifest;
  RefineData data;
};

const Tiny& tiny() {
  static const Tiny t = [] {
    const auto dir = fixture::temp_dir("refine_world");
    Tiny out;
    out.manifest = load_manifest(fixture::tiny_world(dir));
    out.data = pipeline::load(out.manifest).data;
    return out;
  }();
  return t;
}

}  // namespace

TEST(Refine, SelectEstimator) {
  EXPECT_EQ(select_estimator(0.6, 0.5), Estimator::kSingleCountry);
  EXPECT_EQ(select_estimator(0.4, 0.5), Estimator::kCrossCountry);
  EXPECT_EQ(select_estimator(0.5, 0.5), Estimator::kCrossCountry);
  EXPECT_THROW(select_estimator(NAN, 0.5), DataError);
}

TEST(Refine, IterationsNarrowThenAddImageFeatures) {
  RefineData data = tiny().data;
  auto config = tiny().manifest.refine;
  RefineState state;

  run_iteration(state, data, config);
  ASSERT_EQ(state.history.size(), 1u);
  for (const auto& [name, score] : state.history[0].scores) EXPECT_TRUE(std::isfinite(score)) << name;
  EXPECT_EQ(state.history[0].narrowed_clusters, 0u);
  EXPECT_EQ(state.history[0].active_width, osm::kBaseFeatureCount);

  run_iteration(state, data, config);
  EXPECT_GT(state.history[1].narrowed_clusters, 0u);
  EXPECT_EQ(state.history[1].active_width, osm::kBaseFeatureCount);
  EXPECT_FALSE(state.cnn.has_value());

  run_iteration(state, data, config);
  EXPECT_EQ(state.history[2].active_width, osm::kBaseFeatureCount + imgcls::kClassCount);
  EXPECT_TRUE(state.cnn.has_value());
  EXPECT_GT(state.history[2].cnn_labels, 0u);
  EXPECT_FALSE(state.cnn_labels.empty());

  const auto digest = state_digest(state);
  const auto audit = leakage_audit(state, data);
  EXPECT_TRUE(audit.clean()) << (audit.violations.empty() ? "" : audit.violations[0]);
  EXPECT_EQ(state_digest(state), digest);

  const auto preds = place_predictions(state, data);
  ASSERT_EQ(preds.size(), data.places.size());
  for (double p : preds) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 100.0);
  }
}

TEST(Refine, InjectedLeakIsCaughtOnce) {
  RefineData data = tiny().data;
  auto config = tiny().manifest.refine;
  config.iterations = 2;
  config.inject_leak = LeakInjection{validate::Protocol::kLoco, 0, 1};
  RefineState state;
  EXPECT_THROW(run_refine(state, data, config), LeakageError);
  const auto audit = leakage_audit(state, data);
  EXPECT_EQ(audit.violations.size(), 1u);
}

TEST(Refine, SeededRunsAgree) {
  auto config = tiny().manifest.refine;
  config.iterations = 2;
  RefineData a = tiny().data, b = tiny().data;
  RefineState sa, sb;
  run_refine(sa, a, config);
  run_refine(sb, b, config);
  EXPECT_EQ(state_digest(sa), state_digest(sb));
  EXPECT_EQ(format_history(sa), format_history(sb));
}

TEST(Refine, DataValidation) {
  RefineData data = tiny().data;
  ASSERT_GE(data.places.size(), 2u);
  std::swap(data.places[0], data.places[1]);
  EXPECT_THROW(data.validate(), DataError);
  auto config = tiny().manifest.refine;
  config.k = 1;
  EXPECT_THROW(config.validate(), UsageError);
}
