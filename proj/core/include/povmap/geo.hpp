#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace povmap::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
/// Meters per degree of latitude (and of longitude at the equator).
inline constexpr double kMetersPerDegree = kEarthRadiusM * std::numbers::pi / 180.0;

/// WGS-84 coordinate in degrees. Construct through make_point() to validate.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Throws DataError when lat/lon is NaN or out of range.
GeoPoint make_point(double lat, double lon);
bool is_valid(const GeoPoint& p);

/// Great-circle distance on a sphere of radius kEarthRadiusM.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Initial bearing from `from` to `to`, degrees clockwise from north in [0, 360).
double bearing_deg(const GeoPoint& from, const GeoPoint& to);

/// Ground resolution of a Web-Mercator tile pixel:
/// 156,543 * cos(lat) / 2^zoom. Throws UsageError for zoom outside [0, 22].
double meters_per_pixel(double lat_deg, int zoom);

/// Side length of a square analysis window around a place.
class WindowSpec {
 public:
  /// The three standard windows: 1.6 km (one square mile), 5 km and 10 km.
  static const std::array<WindowSpec, 3>& standard();

  /// Accepts only the standard sizes unless `allow_custom` is set.
  explicit WindowSpec(double side_km, bool allow_custom = false);

  double side_km() const { return side_km_; }
  double side_m() const { return side_km_ * 1000.0; }

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;

 private:
  double side_km_;
};

/// Axis-aligned lat/lon box. Membership is half-open: [min, max).
struct BBox {
  double min_lat = 0.0;
  double max_lat = 0.0;
  double min_lon = 0.0;
  double max_lon = 0.0;

  bool contains(const GeoPoint& p) const {
    return p.lat >= min_lat && p.lat < max_lat && p.lon >= min_lon && p.lon < max_lon;
  }
  bool intersects(const BBox& o) const {
    return min_lat < o.max_lat && o.min_lat < max_lat && min_lon < o.max_lon && o.min_lon < max_lon;
  }
  double lat_span() const { return max_lat - min_lat; }
  double lon_span() const { return max_lon - min_lon; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Box spanning side_m north-south and side_m east-west at the center's
/// latitude. Throws DataError when |lat| >= 85.
BBox cell_window(const GeoPoint& center, const WindowSpec& window);
/// Same construction for an arbitrary side in meters.
BBox box_around(const GeoPoint& center, double side_m);

/// Local equirectangular projection centered at `origin` (meters east, north).
struct LocalXY {
  double x = 0.0;
  double y = 0.0;
};

inline LocalXY project_local(const GeoPoint& origin, const GeoPoint& p) {
  const double k = kMetersPerDegree;
  return {(p.lon - origin.lon) * k * std::cos(origin.lat * std::numbers::pi / 180.0),
          (p.lat - origin.lat) * k};
}

/// Inverse of project_local.
GeoPoint unproject_local(const GeoPoint& origin, const LocalXY& xy);

/// Moves `distance_m` along `bearing_deg` on the sphere.
GeoPoint destination(const GeoPoint& from, double bearing_deg, double distance_m);

}  // namespace povmap::geo
