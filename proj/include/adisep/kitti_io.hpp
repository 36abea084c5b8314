#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adisep/depth_map.hpp"

namespace adisep {

class UncertaintyMap;

struct BBox2D {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double height() const { return bottom - top; }
  double width() const { return right - left; }
};

/// One row of a KITTI object label or detection-result file.
struct ObjectLabel {
  std::string type;
  double truncation = 0.0;  // -1 in result files
  int occlusion = 0;        // -1 in result files
  double alpha = 0.0;
  BBox2D bbox;
  double height = 0.0;  // h, w, l in meters
  double width = 0.0;
  double length = 0.0;
  double x = 0.0;  // bottom-center, camera coordinates
  double y = 0.0;
  double z = 0.0;
  double rotation_y = 0.0;
  std::optional<double> score;

  bool is_dont_care() const { return type == "DontCare"; }
};

/// Left color camera projection matrix P2, row-major 3x4.
struct CameraCalib {
  std::array<double, 12> p2{};

  double at(int row, int col) const { return p2[static_cast<std::size_t>(row) * 4 + col]; }
  double fx() const { return at(0, 0); }
  double fy() const { return at(1, 1); }
  double cx() const { return at(0, 2); }
  double cy() const { return at(1, 2); }

  /// P2 = [K | 0] with the given intrinsics.
  static CameraCalib from_intrinsics(double fx, double fy, double cx, double cy);
};

std::vector<ObjectLabel> parse_label_file(std::string_view text);
/// 15-column ground-truth format (score omitted).
std::string write_label_file(std::span<const ObjectLabel> labels);
/// 16-column result format; every label must carry a score.
std::string write_result_file(std::span<const ObjectLabel> labels);

CameraCalib parse_calib(std::string_view text);

/// KITTI depth encoding: 16-bit grayscale, meters = stored / 256, 0 = no measurement.
DepthMap read_depth_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_depth_png(const DepthMap& depth);

/// 8-bit grayscale, pixel = round(255 * U).
std::vector<std::uint8_t> write_uncertainty_png(const UncertaintyMap& u);

/// Decoded 8-bit image (1 = gray, 3 = RGB), interleaved rows.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Any non-16-bit PNG expanded to 8-bit gray or RGB (alpha stripped).
Image8 read_image_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_image_png(const Image8& image);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
std::string read_text_file(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace adisep
