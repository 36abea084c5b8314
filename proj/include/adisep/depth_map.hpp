#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace adisep {

/// Per-pixel metric depth with a validity mask. Invalid pixels hold depth 0.
class DepthMap {
 public:
  DepthMap() = default;
  /// All-invalid map of the given size.
  DepthMap(int height, int width);
  /// Builds a map from raw depths; entries <= 0 or non-finite become invalid.
  DepthMap(int height, int width, std::vector<double> depths);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return depth_.size(); }

  double depth(int y, int x) const { return depth_[index(y, x)]; }
  bool valid(int y, int x) const { return valid_[index(y, x)] != 0; }
  double depth(std::size_t i) const { return depth_[i]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  std::span<const double> depths() const { return depth_; }

  void set(int y, int x, double meters);
  void invalidate(int y, int x);

  std::size_t valid_count() const;
  std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width_ + x; }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> depth_;
  std::vector<std::uint8_t> valid_;
};

}  // namespace adisep
