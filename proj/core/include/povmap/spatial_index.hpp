#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "povmap/geo.hpp"

namespace povmap::spatial {

struct Nearest {
  std::size_t index = 0;  ///< position of the item in the build input
  double meters = 0.0;
};

/// Exact nearest-neighbor and range queries over points under great-circle
/// distance. Internally a k-d tree over unit vectors: chord length is monotone
/// in arc length, so chord bounds prune safely and the final ranking uses
/// haversine_m with ties broken by the smaller index.
class PointIndex {
 public:
  PointIndex() = default;
  explicit PointIndex(std::vector<geo::GeoPoint> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const geo::GeoPoint& point(std::size_t i) const { return points_[i]; }

  /// Throws DataError on an empty index.
  Nearest nearest(const geo::GeoPoint& q) const;
  /// Indices with haversine_m(q, p) <= radius_m, ascending.
  std::vector<std::size_t> within_radius(const geo::GeoPoint& q, double radius_m) const;
  /// Indices of points inside the half-open box, ascending.
  std::vector<std::size_t> within_box(const geo::BBox& box) const;
  std::size_t count_in_box(const geo::BBox& box) const;

 private:
  struct Node {
    std::array<double, 3> lo{}, hi{};
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<geo::GeoPoint> points_;
  std::vector<std::array<double, 3>> xyz_;
  std::vector<std::uint32_t> order_;  ///< tree leaf order
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> by_lat_;  ///< indices sorted by latitude
};

/// Distance from q to the segment a-b in a local equirectangular projection
/// centered on q. This is the road-distance measure used throughout.
double point_segment_distance_m(const geo::GeoPoint& q, const geo::GeoPoint& a, const geo::GeoPoint& b);

struct Segment {
  geo::GeoPoint a;
  geo::GeoPoint b;
};

/// Exact nearest-segment and box queries (bounding-volume tree over segment
/// extents; node bounds are exact lower bounds under the projection above).
class SegmentIndex {
 public:
  SegmentIndex() = default;
  explicit SegmentIndex(std::vector<Segment> segments);

  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  const Segment& segment(std::size_t i) const { return segments_[i]; }

  /// Throws DataError on an empty index.
  Nearest nearest(const geo::GeoPoint& q) const;
  /// Indices of segments whose extent intersects the closed box, ascending.
  std::vector<std::size_t> overlapping(const geo::BBox& box) const;

 private:
  struct Node {
    geo::BBox box;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Segment> segments_;
  std::vector<geo::BBox> extents_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace povmap::spatial
