#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "povmap/error.hpp"
#include "povmap/spatial_index.hpp"

using namespace povmap;
using geo::GeoPoint;

namespace {

std::vector<GeoPoint> random_points(std::size_t n, std::mt19937_64& rng, double lat0 = -11, double lon0 = 16,
                                    double span = 0.5) {
  std::uniform_real_distribution<double> d(0, span);
  std::vector<GeoPoint> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({lat0 + d(rng), lon0 + d(rng)});
  return pts;
}

}  // namespace

TEST(PointIndex, SingleItem) {
  const spatial::PointIndex idx({{-11, 16}});
  const auto n = idx.nearest({-10, 17});
  EXPECT_EQ(n.index, 0u);
  EXPECT_NEAR(n.meters, oracle::haversine({-11, 16}, {-10, 17}), 1e-6);
}

TEST(PointIndex, EmptyThrows) {
  const spatial::PointIndex idx;
  EXPECT_THROW(idx.nearest({0, 0}), DataError);
  EXPECT_EQ(idx.count_in_box({-1, 1, -1, 1}), 0u);
}

TEST(PointIndex, QueryOnItemIsZero) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(300, rng);
  const spatial::PointIndex idx(pts);
  for (std::size_t i = 0; i < pts.size(); i += 7) {
    const auto n = idx.nearest(pts[i]);
    EXPECT_EQ(n.meters, 0.0);
    EXPECT_EQ(pts[n.index], pts[i]);
  }
}

TEST(PointIndex, NearestMatchesBruteForce) {
  std::mt19937_64 rng(2);
  const auto pts = random_points(1000, rng);
  const spatial::PointIndex idx(pts);
  const auto queries = random_points(100, rng, -11.2, 15.8, 0.9);
  for (const auto& q : queries) {
    const auto got = idx.nearest(q);
    const auto want = oracle::nearest_point(pts, q);
    EXPECT_EQ(got.index, want.index);
    EXPECT_NEAR(got.meters, want.meters, 1e-6 * std::max(1.0, want.meters));
  }
}

TEST(PointIndex, RadiusAndBoxMatchBruteForce) {
  std::mt19937_64 rng(3);
  const auto pts = random_points(800, rng);
  const spatial::PointIndex idx(pts);
  for (const auto& q : random_points(40, rng)) {
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (geo::haversine_m(q, pts[i]) <= 5000.0) want.push_back(i);
    }
    EXPECT_EQ(idx.within_radius(q, 5000.0), want);
    const auto box = geo::cell_window(q, geo::WindowSpec(5.0));
    std::vector<std::size_t> in_box;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (box.contains(pts[i])) in_box.push_back(i);
    }
    EXPECT_EQ(idx.within_box(box), in_box);
    EXPECT_EQ(idx.count_in_box(box), in_box.size());
  }
}

TEST(SegmentIndex, NearestMatchesBruteForce) {
  std::mt19937_64 rng(4);
  const auto starts = random_points(500, rng);
  std::uniform_real_distribution<double> step(-0.01, 0.01);
  std::vector<spatial::Segment> segs;
  std::vector<std::pair<GeoPoint, GeoPoint>> plain;
  for (const auto& a : starts) {
    const GeoPoint b{a.lat + step(rng), a.lon + step(rng)};
    segs.push_back({a, b});
    plain.emplace_back(a, b);
  }
  const spatial::SegmentIndex idx(segs);
  for (const auto& q : random_points(100, rng, -11.1, 15.9, 0.7)) {
    const auto got = idx.nearest(q);
    const auto want = oracle::nearest_segment(plain, q);
    EXPECT_EQ(got.index, want.index);
    EXPECT_NEAR(got.meters, want.meters, 1e-6 * std::max(1.0, want.meters));
  }
}

TEST(SegmentIndex, PointSegmentDistance) {
  const GeoPoint a{-11, 16}, b{-11, 16.01};
  EXPECT_NEAR(spatial::point_segment_distance_m({-11, 16.005}, a, b), 0.0, 1e-9);
  const GeoPoint north = geo::destination({-11, 16.005}, 0, 250);
  EXPECT_NEAR(spatial::point_segment_distance_m(north, a, b), 250.0, 0.01);
  EXPECT_NEAR(spatial::point_segment_distance_m(north, a, b), oracle::segment_distance(north, a, b), 1e-9);
}

TEST(SegmentIndex, OverlappingMatchesBruteForce) {
  std::mt19937_64 rng(5);
  const auto starts = random_points(300, rng);
  std::vector<spatial::Segment> segs;
  for (const auto& a : starts) segs.push_back({a, {a.lat + 0.004, a.lon - 0.003}});
  const spatial::SegmentIndex idx(segs);
  for (const auto& q : random_points(30, rng)) {
    const auto box = geo::cell_window(q, geo::WindowSpec(1.6));
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const double lo_lat = std::min(segs[i].a.lat, segs[i].b.lat), hi_lat = std::max(segs[i].a.lat, segs[i].b.lat);
      const double lo_lon = std::min(segs[i].a.lon, segs[i].b.lon), hi_lon = std::max(segs[i].a.lon, segs[i].b.lon);
      if (lo_lat <= box.max_lat && hi_lat >= box.min_lat && lo_lon <= box.max_lon && hi_lon >= box.min_lon) {
        want.push_back(i);
      }
    }
    EXPECT_EQ(idx.overlapping(box), want);
  }
}
