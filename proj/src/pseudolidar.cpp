#include "adisep/pseudolidar.hpp"

#include <fmt/format.h>

#include <cmath>
#include <sstream>

#include "adisep/errors.hpp"

namespace adisep {

namespace {

// Inverse of the left 3x3 block of P2.
struct Inverse3 {
  double m[9];
};

Inverse3 invert_camera_block(const CameraCalib& c) {
  if (!(c.fx() > 0.0) || !(c.fy() > 0.0)) throw ParameterError("calibration focal lengths must be positive");
  const double a = c.at(0, 0), b = c.at(0, 1), d = c.at(0, 2);
  const double e = c.at(1, 0), f = c.at(1, 1), g = c.at(1, 2);
  const double h = c.at(2, 0), i = c.at(2, 1), k = c.at(2, 2);
  const double det = a * (f * k - g * i) - b * (e * k - g * h) + d * (e * i - f * h);
  if (!std::isfinite(det) || std::abs(det) < 1e-12) throw ParameterError("calibration matrix is singular");
  Inverse3 inv{};
  inv.m[0] = (f * k - g * i) / det;
  inv.m[1] = (d * i - b * k) / det;
  inv.m[2] = (b * g - d * f) / det;
  inv.m[3] = (g * h - e * k) / det;
  inv.m[4] = (a * k - d * h) / det;
  inv.m[5] = (d * e - a * g) / det;
  inv.m[6] = (e * i - f * h) / det;
  inv.m[7] = (b * h - a * i) / det;
  inv.m[8] = (a * f - b * e) / det;
  return inv;
}

bool unproject(const CameraCalib& c, const Inverse3& inv, double u, double v, double s, Point3& out) {
  const double r0 = s * u - c.at(0, 3);
  const double r1 = s * v - c.at(1, 3);
  const double r2 = s - c.at(2, 3);
  out = {inv.m[0] * r0 + inv.m[1] * r1 + inv.m[2] * r2, inv.m[3] * r0 + inv.m[4] * r1 + inv.m[5] * r2,
         inv.m[6] * r0 + inv.m[7] * r1 + inv.m[8] * r2};
  return out.z > 0.0 && std::isfinite(out.x) && std::isfinite(out.y) && std::isfinite(out.z);
}

}  // namespace

Pixel project(const CameraCalib& c, const Point3& p) {
  const double s = c.at(2, 0) * p.x + c.at(2, 1) * p.y + c.at(2, 2) * p.z + c.at(2, 3);
  const double su = c.at(0, 0) * p.x + c.at(0, 1) * p.y + c.at(0, 2) * p.z + c.at(0, 3);
  const double sv = c.at(1, 0) * p.x + c.at(1, 1) * p.y + c.at(1, 2) * p.z + c.at(1, 3);
  return {su / s, sv / s};
}

PointCloud backproject(const DepthMap& depth, const CameraCalib& calib) {
  const auto inv = invert_camera_block(calib);
  PointCloud cloud;
  cloud.points.reserve(depth.valid_count());
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.valid(v, u)) continue;
      Point3 p;
      if (unproject(calib, inv, u, v, depth.depth(v, u), p)) cloud.points.push_back(p);
    }
  }
  return cloud;
}

PointCloud backproject_stack(const SubDepthStack& stack, const CameraCalib& calib) {
  const auto inv = invert_camera_block(calib);
  PointCloud cloud;
  for (int i = 0; i < stack.layers(); ++i) {
    for (int v = 0; v < stack.height(); ++v) {
      for (int u = 0; u < stack.width(); ++u) {
        const double s = stack.at(i, v, u);
        if (!(s > 0.0)) continue;
        Point3 p;
        if (unproject(calib, inv, u, v, s, p)) {
          cloud.points.push_back(p);
          cloud.intervals.push_back(i);
        }
      }
    }
  }
  return cloud;
}

std::string write_ply(const PointCloud& cloud) {
  if (cloud.tagged() && cloud.intervals.size() != cloud.points.size()) {
    throw ShapeError("point cloud interval tags do not match point count");
  }
  std::string out;
  out += "ply\nformat ascii 1.0\ncomment adisep pseudo-lidar export\n";
  out += fmt::format("element vertex {}\n", cloud.points.size());
  out += "property float x\nproperty float y\nproperty float z\n";
  if (cloud.tagged()) out += "property int interval\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    // 9 significant digits reproduce a float exactly
    const auto x = static_cast<float>(cloud.points[i].x);
    const auto y = static_cast<float>(cloud.points[i].y);
    const auto z = static_cast<float>(cloud.points[i].z);
    if (cloud.tagged()) {
      out += fmt::format("{:.9g} {:.9g} {:.9g} {}\n", x, y, z, cloud.intervals[i]);
    } else {
      out += fmt::format("{:.9g} {:.9g} {:.9g}\n", x, y, z);
    }
  }
  return out;
}

PointCloud read_ply(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "ply") throw ParseError(1, "missing 'ply' magic");
  std::size_t count = 0;
  bool tagged = false;
  bool ascii = false;
  bool header_done = false;
  while (next()) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string kind;
      ls >> kind;
      ascii = kind == "ascii";
    } else if (key == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex" || !ls) throw ParseError(line_no, "only a vertex element is supported");
    } else if (key == "property") {
      std::string type, name;
      ls >> type >> name;
      if (name == "interval") tagged = true;
    } else if (key == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw ParseError(line_no, "missing end_header");
  if (!ascii) throw ParseError(line_no, "only ASCII PLY is supported");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!next()) throw ParseError(line_no + 1, "fewer vertices than declared");
    std::istringstream ls(line);
    float x = 0, y = 0, z = 0;
    ls >> x >> y >> z;
    int tag = 0;
    if (tagged) ls >> tag;
    if (!ls) throw ParseError(line_no, "malformed vertex line");
    cloud.points.push_back({x, y, z});
    if (tagged) cloud.intervals.push_back(tag);
  }
  return cloud;
}

}  // namespace adisep
