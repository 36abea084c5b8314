#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adisep/adis.hpp"
#include "adisep/depth_map.hpp"
#include "adisep/kitti_io.hpp"

namespace adisep {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Camera-frame points with an optional interval tag per point.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<int> intervals;  // empty, or one entry per point

  std::size_t size() const { return points.size(); }
  bool tagged() const { return !intervals.empty(); }
};

/// Pixel (u, v) of a camera-frame point under P2.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};
Pixel project(const CameraCalib& calib, const Point3& p);

/// Inverts P2 for every valid pixel, reading the depth as the projective scale
/// s in P2 [x y z 1]^T = s [u v 1]^T. With a [K | t] matrix whose last row is
/// (0 0 1 0) this is x = (u - cx) z / fx - P2[0,3] / fx, y = (v - cy) z / fy -
/// P2[1,3] / fy. Pixel centers are at integer coordinates.
PointCloud backproject(const DepthMap& depth, const CameraCalib& calib);

/// Union of per-layer back-projections, tagged with the zero-based layer index.
PointCloud backproject_stack(const SubDepthStack& stack, const CameraCalib& calib);

/// ASCII PLY: float x/y/z plus an int "interval" property when tagged.
std::string write_ply(const PointCloud& cloud);
/// Reads the ASCII subset produced by write_ply.
PointCloud read_ply(std::string_view text);

}  // namespace adisep
