#include "povmap/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "povmap/error.hpp"

namespace povmap::spatial {
namespace {

constexpr std::uint32_t kLeafSize = 8;
// Slack on pruning bounds so rounding in the bound never discards a candidate
// that haversine ranks first.
constexpr double kRelSlack = 1e-9;
constexpr double kAbsSlackChord = 1e-12;
constexpr double kAbsSlackM = 1e-6;

std::array<double, 3> to_unit(const geo::GeoPoint& p) {
  const double phi = p.lat * std::numbers::pi / 180.0;
  const double lam = p.lon * std::numbers::pi / 180.0;
  return {std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam), std::sin(phi)};
}

double chord_for_arc(double meters) {
  const double angle = std::min(meters / geo::kEarthRadiusM, std::numbers::pi);
  return 2.0 * std::sin(angle / 2.0);
}

double box_distance3(const std::array<double, 3>& q, const std::array<double, 3>& lo,
                     const std::array<double, 3>& hi) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    double e = 0.0;
    if (q[d] < lo[d]) e = lo[d] - q[d];
    else if (q[d] > hi[d]) e = q[d] - hi[d];
    s += e * e;
  }
  return std::sqrt(s);
}

bool better(double d, std::size_t i, double best_d, std::size_t best_i) {
  return d < best_d || (d == best_d && i < best_i);
}

}  // namespace

PointIndex::PointIndex(std::vector<geo::GeoPoint> points) : points_(std::move(points)) {
  xyz_.reserve(points_.size());
  for (const auto& p : points_) xyz_.push_back(to_unit(p));
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
  by_lat_.resize(points_.size());
  std::iota(by_lat_.begin(), by_lat_.end(), 0u);
  std::stable_sort(by_lat_.begin(), by_lat_.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a].lat < points_[b].lat; });
}

std::int32_t PointIndex::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()};
  node.hi = {-node.lo[0], -node.lo[1], -node.lo[2]};
  for (std::uint32_t i = begin; i < end; ++i) {
    for (int d = 0; d < 3; ++d) {
      node.lo[d] = std::min(node.lo[d], xyz_[order_[i]][d]);
      node.hi[d] = std::max(node.hi[d], xyz_[order_[i]][d]);
    }
  }
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  for (int d = 1; d < 3; ++d) {
    if (node.hi[d] - node.lo[d] > node.hi[axis] - node.lo[axis]) axis = d;
  }
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return xyz_[a][axis] < xyz_[b][axis] || (xyz_[a][axis] == xyz_[b][axis] && a < b);
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

Nearest PointIndex::nearest(const geo::GeoPoint& q) const {
  if (points_.empty()) throw DataError("nearest() on an empty point index");
  const auto qx = to_unit(q);
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t best_i = std::numeric_limits<std::size_t>::max();
  double best_chord = std::numeric_limits<double>::infinity();

  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (box_distance3(qx, n.lo, n.hi) > best_chord * (1.0 + kRelSlack) + kAbsSlackChord) continue;
    if (n.left < 0) {
      for (std::uint32_t k = n.begin; k < n.end; ++k) {
        const std::uint32_t i = order_[k];
        const double d = geo::haversine_m(q, points_[i]);
        if (better(d, i, best_d, best_i)) {
          best_d = d;
          best_i = i;
          best_chord = chord_for_arc(d);
        }
      }
      continue;
    }
    // Visit the nearer child first.
    const Node& l = nodes_[n.left];
    const Node& r = nodes_[n.right];
    if (box_distance3(qx, l.lo, l.hi) <= box_distance3(qx, r.lo, r.hi)) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return {best_i, best_d};
}

std::vector<std::size_t> PointIndex::within_radius(const geo::GeoPoint& q, double radius_m) const {
  std::vector<std::size_t> out;
  if (points_.empty() || radius_m < 0.0) return out;
  const auto qx = to_unit(q);
  const double limit = chord_for_arc(radius_m) * (1.0 + kRelSlack) + kAbsSlackChord;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (box_distance3(qx, n.lo, n.hi) > limit) continue;
    if (n.left < 0) {
      for (std::uint32_t k = n.begin; k < n.end; ++k) {
        if (geo::haversine_m(q, points_[order_[k]]) <= radius_m) out.push_back(order_[k]);
      }
      continue;
    }
    stack.push_back(n.left);
    stack.push_back(n.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> PointIndex::within_box(const geo::BBox& box) const {
  std::vector<std::size_t> out;
  auto first = std::lower_bound(by_lat_.begin(), by_lat_.end(), box.min_lat,
                                [&](std::uint32_t i, double v) { return points_[i].lat < v; });
  for (auto it = first; it != by_lat_.end() && points_[*it].lat < box.max_lat; ++it) {
    if (box.contains(points_[*it])) out.push_back(*it);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t PointIndex::count_in_box(const geo::BBox& box) const {
  std::size_t count = 0;
  auto first = std::lower_bound(by_lat_.begin(), by_lat_.end(), box.min_lat,
                                [&](std::uint32_t i, double v) { return points_[i].lat < v; });
  for (auto it = first; it != by_lat_.end() && points_[*it].lat < box.max_lat; ++it) {
    if (box.contains(points_[*it])) ++count;
  }
  return count;
}

double point_segment_distance_m(const geo::GeoPoint& q, const geo::GeoPoint& a, const geo::GeoPoint& b) {
  const geo::LocalXY pa = geo::project_local(q, a);
  const geo::LocalXY pb = geo::project_local(q, b);
  const double dx = pb.x - pa.x;
  const double dy = pb.y - pa.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(-(pa.x * dx + pa.y * dy) / len2, 0.0, 1.0);
  const double x = pa.x + t * dx;
  const double y = pa.y + t * dy;
  return std::hypot(x, y);
}

namespace {

geo::BBox extent(const Segment& s) {
  return {std::min(s.a.lat, s.b.lat), std::max(s.a.lat, s.b.lat), std::min(s.a.lon, s.b.lon),
          std::max(s.a.lon, s.b.lon)};
}

// Lower bound on point_segment_distance_m for any segment inside `box`:
// the projection is axis-aligned and affine, so the box maps to a rectangle.
double box_lower_bound_m(const geo::GeoPoint& q, const geo::BBox& box) {
  const geo::LocalXY lo = geo::project_local(q, {box.min_lat, box.min_lon});
  const geo::LocalXY hi = geo::project_local(q, {box.max_lat, box.max_lon});
  const double ex = lo.x > 0.0 ? lo.x : hi.x < 0.0 ? -hi.x : 0.0;
  const double ey = lo.y > 0.0 ? lo.y : hi.y < 0.0 ? -hi.y : 0.0;
  return std::hypot(ex, ey);
}

}  // namespace

SegmentIndex::SegmentIndex(std::vector<Segment> segments) : segments_(std::move(segments)) {
  extents_.reserve(segments_.size());
  for (const auto& s : segments_) extents_.push_back(extent(s));
  order_.resize(segments_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!segments_.empty()) build(0, static_cast<std::uint32_t>(segments_.size()));
}

std::int32_t SegmentIndex::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.box = extents_[order_[begin]];
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    const auto& e = extents_[order_[i]];
    node.box.min_lat = std::min(node.box.min_lat, e.min_lat);
    node.box.max_lat = std::max(node.box.max_lat, e.max_lat);
    node.box.min_lon = std::min(node.box.min_lon, e.min_lon);
    node.box.max_lon = std::max(node.box.max_lon, e.max_lon);
  }
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  const bool by_lat = node.box.lat_span() >= node.box.lon_span();
  auto key = [&](std::uint32_t i) {
    const auto& e = extents_[i];
    return by_lat ? e.min_lat + e.max_lat : e.min_lon + e.max_lon;
  };
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b) || (key(a) == key(b) && a < b); });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

Nearest SegmentIndex::nearest(const geo::GeoPoint& q) const {
  if (segments_.empty()) throw DataError("nearest() on an empty segment index");
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t best_i = std::numeric_limits<std::size_t>::max();
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (box_lower_bound_m(q, n.box) > best_d * (1.0 + kRelSlack) + kAbsSlackM) continue;
    if (n.left < 0) {
      for (std::uint32_t k = n.begin; k < n.end; ++k) {
        const std::uint32_t i = order_[k];
        const double d = point_segment_distance_m(q, segments_[i].a, segments_[i].b);
        if (better(d, i, best_d, best_i)) {
          best_d = d;
          best_i = i;
        }
      }
      continue;
    }
    const double dl = box_lower_bound_m(q, nodes_[n.left].box);
    const double dr = box_lower_bound_m(q, nodes_[n.right].box);
    if (dl <= dr) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return {best_i, best_d};
}

std::vector<std::size_t> SegmentIndex::overlapping(const geo::BBox& box) const {
  std::vector<std::size_t> out;
  if (segments_.empty()) return out;
  auto touches = [&](const geo::BBox& e) {
    return e.min_lat <= box.max_lat && box.min_lat <= e.max_lat && e.min_lon <= box.max_lon &&
           box.min_lon <= e.max_lon;
  };
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (!touches(n.box)) continue;
    if (n.left < 0) {
      for (std::uint32_t k = n.begin; k < n.end; ++k) {
        if (touches(extents_[order_[k]])) out.push_back(order_[k]);
      }
      continue;
    }
    stack.push_back(n.left);
    stack.push_back(n.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace povmap::spatial
