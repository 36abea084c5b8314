#include "adisep/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace adisep {

namespace {

constexpr double kEdgeEps = 1e-9;
constexpr double kAreaEps = 1e-12;

// > 0 when p lies left of the directed edge a->b.
double side(const Point2& a, const Point2& b, const Point2& p) {
  return (b.x - a.x) * (p.z - a.z) - (b.z - a.z) * (p.x - a.x);
}

Point2 edge_crossing(const Point2& p, const Point2& q, double sp, double sq) {
  const double t = sp / (sp - sq);
  return {p.x + t * (q.x - p.x), p.z + t * (q.z - p.z)};
}

}  // namespace

std::array<Point2, 4> bev_polygon(const Box3D& box) {
  const double c = std::cos(box.rotation_y);
  const double s = std::sin(box.rotation_y);
  const double hl = box.l / 2.0;
  const double hw = box.w / 2.0;
  // Local corners in CCW order; rotation about the y axis maps (lx, lz) to
  // (c*lx + s*lz, -s*lx + c*lz), which preserves orientation.
  const std::array<Point2, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
  std::array<Point2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.x + c * local[i].x + s * local[i].z, box.z - s * local[i].x + c * local[i].z};
  }
  return out;
}

double polygon_area(std::span<const Point2> polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % polygon.size()];
    twice += a.x * b.z - b.x * a.z;
  }
  return twice / 2.0;
}

std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    const double len = std::hypot(b.x - a.x, b.z - a.z);
    if (len <= 0.0) continue;
    std::vector<Point2> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2& p = in[i];
      const Point2& q = in[(i + 1) % in.size()];
      // Signed distances to the clip edge; vertices within kEdgeEps count as inside.
      const double sp = side(a, b, p) / len;
      const double sq = side(a, b, q) / len;
      const bool p_in = sp >= -kEdgeEps;
      const bool q_in = sq >= -kEdgeEps;
      if (p_in) out.push_back(p);
      if (p_in != q_in) out.push_back(edge_crossing(p, q, sp, sq));
    }
  }
  return out;
}

double polygon_intersection_area(std::span<const Point2> p, std::span<const Point2> q) {
  const auto inter = clip_convex(p, q);
  const double area = polygon_area(inter);
  return area < kAreaEps ? 0.0 : area;
}

double vertical_overlap(const Box3D& a, const Box3D& b) {
  const double top = std::max(a.y - a.h, b.y - b.h);
  const double bottom = std::min(a.y, b.y);
  return std::max(0.0, bottom - top);
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const auto pa = bev_polygon(a);
  const auto pb = bev_polygon(b);
  const double inter = polygon_intersection_area(pa, pb);
  const double uni = a.l * a.w + b.l * b.w - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double dy = vertical_overlap(a, b);
  if (dy <= 0.0) return 0.0;
  const auto pa = bev_polygon(a);
  const auto pb = bev_polygon(b);
  const double inter = polygon_intersection_area(pa, pb) * dy;
  const double uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace adisep
