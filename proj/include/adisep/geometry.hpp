#pragma once

#include <array>
#include <span>
#include <vector>

namespace adisep {

struct Point2 {
  double x = 0.0;
  double z = 0.0;
};

/// KITTI camera-frame 3D box: (x, y, z) is the bottom-face center with y
/// pointing down, so the box occupies y in [y - h, y].
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double h = 1.0;
  double w = 1.0;
  double l = 1.0;
  double rotation_y = 0.0;
};

/// Bird's-eye footprint in the (x, z) plane, counter-clockwise. Length runs
/// along x at rotation_y = 0.
std::array<Point2, 4> bev_polygon(const Box3D& box);

/// Signed shoelace area; positive for counter-clockwise vertex order.
double polygon_area(std::span<const Point2> polygon);

/// p ∩ q for convex counter-clockwise polygons (Sutherland-Hodgman).
std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip);

double polygon_intersection_area(std::span<const Point2> p, std::span<const Point2> q);

double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

/// Overlap of the vertical extents [y - h, y].
double vertical_overlap(const Box3D& a, const Box3D& b);

}  // namespace adisep
