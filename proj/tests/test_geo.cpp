#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "povmap/error.hpp"
#include "povmap/geo.hpp"

using namespace povmap;
using geo::GeoPoint;

TEST(Geo, HaversineQuarterMeridian) {
  const double d = geo::haversine_m({0, 0}, {90, 0});
  EXPECT_NEAR(d, geo::kEarthRadiusM * std::numbers::pi / 2, 1e-6);
  EXPECT_EQ(geo::haversine_m({12.5, 3.25}, {12.5, 3.25}), 0.0);
}

TEST(Geo, HaversineOneDegreeLatitude) {
  EXPECT_NEAR(geo::haversine_m({0, 0}, {1, 0}), 111194.93, 0.01);
}

TEST(Geo, TriangleInequalityRandomTriples) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-179, 179);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = geo::haversine_m(a, b), bc = geo::haversine_m(b, c), ac = geo::haversine_m(a, c);
    EXPECT_LE(ac, (ab + bc) * (1 + 1e-6));
    EXPECT_NEAR(ab, oracle::haversine(a, b), 1e-6 * std::max(1.0, ab));
  }
}

TEST(Geo, MakePointRejectsBadCoordinates) {
  EXPECT_THROW(geo::make_point(91, 0), DataError);
  EXPECT_THROW(geo::make_point(0, 180.5), DataError);
  EXPECT_THROW(geo::make_point(std::nan(""), 0), DataError);
  EXPECT_NO_THROW(geo::make_point(-90, 180));
}

TEST(Geo, MetersPerPixelEquatorZoom16) {
  EXPECT_NEAR(geo::meters_per_pixel(0, 16), 2.3887, 1e-3);
}

TEST(Geo, MetersPerPixelDecreasesWithZoomAndLatitude) {
  for (int z = 0; z < 22; ++z) EXPECT_GT(geo::meters_per_pixel(10, z), geo::meters_per_pixel(10, z + 1));
  for (double lat = 0; lat < 80; lat += 5) EXPECT_GT(geo::meters_per_pixel(lat, 16), geo::meters_per_pixel(lat + 5, 16));
  EXPECT_GT(geo::meters_per_pixel(-20, 16), geo::meters_per_pixel(-25, 16));
}

TEST(Geo, MetersPerPixelZoomRange) {
  EXPECT_THROW(geo::meters_per_pixel(0, -1), UsageError);
  EXPECT_THROW(geo::meters_per_pixel(0, 23), UsageError);
}

TEST(Geo, WindowSpecStandardSizes) {
  const auto& w = geo::WindowSpec::standard();
  EXPECT_DOUBLE_EQ(w[0].side_km(), 1.6);
  EXPECT_DOUBLE_EQ(w[1].side_km(), 5.0);
  EXPECT_DOUBLE_EQ(w[2].side_km(), 10.0);
  EXPECT_THROW(geo::WindowSpec(2.0), UsageError);
  EXPECT_NO_THROW(geo::WindowSpec(2.0, true));
}

TEST(Geo, CellWindowLatSpanAtEquator) {
  const auto box = geo::cell_window({0, 0}, geo::WindowSpec(1.6));
  EXPECT_NEAR(box.lat_span(), 1600.0 / 111194.9, 1e-6);
  EXPECT_NEAR(box.lon_span(), 1600.0 / 111194.9, 1e-6);
}

TEST(Geo, CellWindowContainsCenter) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-179, 179);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint c{lat(rng), lon(rng)};
    EXPECT_TRUE(geo::cell_window(c, geo::WindowSpec(1.6)).contains(c));
  }
}

TEST(Geo, CellWindowLonSpanDoublesAtSixty) {
  const auto eq = geo::cell_window({0, 10}, geo::WindowSpec(5.0));
  const auto hi = geo::cell_window({60, 10}, geo::WindowSpec(5.0));
  EXPECT_NEAR(hi.lon_span(), 2 * eq.lon_span(), 1e-9);
  EXPECT_THROW(geo::cell_window({86, 0}, geo::WindowSpec(5.0)), DataError);
}

TEST(Geo, DestinationAndBearingAgree) {
  const GeoPoint o{-12, 15};
  for (double b : {0.0, 45.0, 90.0, 200.0, 315.0}) {
    const GeoPoint p = geo::destination(o, b, 3000.0);
    EXPECT_NEAR(geo::haversine_m(o, p), 3000.0, 1e-6);
    const double diff = std::fmod(geo::bearing_deg(o, p) - b + 540.0, 360.0) - 180.0;
    EXPECT_NEAR(diff, 0.0, 1e-6);
  }
}

TEST(Geo, LocalProjectionRoundTrip) {
  const GeoPoint o{-11.5, 16.2};
  const GeoPoint p{-11.49, 16.215};
  const GeoPoint back = geo::unproject_local(o, geo::project_local(o, p));
  EXPECT_NEAR(back.lat, p.lat, 1e-12);
  EXPECT_NEAR(back.lon, p.lon, 1e-12);
}
