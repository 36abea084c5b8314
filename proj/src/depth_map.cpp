#include "adisep/depth_map.hpp"

#include <algorithm>
#include <cmath>

#include "adisep/errors.hpp"

namespace adisep {

DepthMap::DepthMap(int height, int width) : height_(height), width_(width) {
  if (height < 1 || width < 1) throw ShapeError("depth map dimensions must be >= 1");
  depth_.assign(static_cast<std::size_t>(height) * width, 0.0);
  valid_.assign(depth_.size(), 0);
}

DepthMap::DepthMap(int height, int width, std::vector<double> depths) : DepthMap(height, width) {
  if (depths.size() != depth_.size()) throw ShapeError("depth buffer length does not match height*width");
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (std::isfinite(depths[i]) && depths[i] > 0.0) {
      depth_[i] = depths[i];
      valid_[i] = 1;
    }
  }
}

void DepthMap::set(int y, int x, double meters) {
  const std::size_t i = index(y, x);
  if (std::isfinite(meters) && meters > 0.0) {
    depth_[i] = meters;
    valid_[i] = 1;
  } else {
    depth_[i] = 0.0;
    valid_[i] = 0;
  }
}

void DepthMap::invalidate(int y, int x) { set(y, x, 0.0); }

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

}  // namespace adisep
