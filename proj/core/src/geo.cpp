#include "povmap/geo.hpp"

#include <string>

#include "povmap/error.hpp"

namespace povmap::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

GeoPoint make_point(double lat, double lon) {
  GeoPoint p{lat, lon};
  if (!is_valid(p)) {
    throw DataError("invalid coordinate (" + std::to_string(lat) + ", " + std::to_string(lon) + ")");
  }
  return p;
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  if (h > 1.0) h = 1.0;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double bearing_deg(const GeoPoint& from, const GeoPoint& to) {
  const double phi1 = from.lat * kDegToRad;
  const double phi2 = to.lat * kDegToRad;
  const double dlambda = (to.lon - from.lon) * kDegToRad;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = std::atan2(y, x) * kRadToDeg;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double meters_per_pixel(double lat_deg, int zoom) {
  if (zoom < 0 || zoom > 22) throw UsageError("zoom must be in [0, 22], got " + std::to_string(zoom));
  return 156543.0 * std::cos(lat_deg * std::numbers::pi / 180.0) / std::ldexp(1.0, zoom);
}

const std::array<WindowSpec, 3>& WindowSpec::standard() {
  static const std::array<WindowSpec, 3> windows{WindowSpec(1.6), WindowSpec(5.0), WindowSpec(10.0)};
  return windows;
}

WindowSpec::WindowSpec(double side_km, bool allow_custom) : side_km_(side_km) {
  if (!(side_km > 0.0) || !std::isfinite(side_km)) {
    throw UsageError("window side must be positive, got " + std::to_string(side_km));
  }
  if (!allow_custom && side_km != 1.6 && side_km != 5.0 && side_km != 10.0) {
    throw UsageError("window side must be one of 1.6, 5, 10 km, got " + std::to_string(side_km));
  }
}

BBox box_around(const GeoPoint& center, double side_m) {
  if (!(std::abs(center.lat) < 85.0)) {
    throw DataError("window center too close to a pole (lat " + std::to_string(center.lat) + ")");
  }
  const double half_lat = 0.5 * side_m / kMetersPerDegree;
  const double half_lon = half_lat / std::cos(center.lat * kDegToRad);
  return {center.lat - half_lat, center.lat + half_lat, center.lon - half_lon, center.lon + half_lon};
}

BBox cell_window(const GeoPoint& center, const WindowSpec& window) {
  return box_around(center, window.side_m());
}

GeoPoint unproject_local(const GeoPoint& origin, const LocalXY& xy) {
  const double k = kMetersPerDegree;
  return {origin.lat + xy.y / k, origin.lon + xy.x / (k * std::cos(origin.lat * kDegToRad))};
}

GeoPoint destination(const GeoPoint& from, double bearing, double distance_m) {
  const double delta = distance_m / kEarthRadiusM;
  const double theta = bearing * kDegToRad;
  const double phi1 = from.lat * kDegToRad;
  const double lambda1 = from.lon * kDegToRad;
  const double sin_phi2 = std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
  const double phi2 = std::asin(sin_phi2);
  const double lambda2 = lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                              std::cos(delta) - std::sin(phi1) * sin_phi2);
  return {phi2 * kRadToDeg, lambda2 * kRadToDeg};
}

}  // namespace povmap::geo
