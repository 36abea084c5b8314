#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adisep/adis.hpp"
#include "adisep/config.hpp"
#include "adisep/kitti_io.hpp"
#include "adisep/tensor.hpp"
#include "adisep/uncertainty.hpp"

namespace adisep {

/// Small stand-in for the detector backbone: two 3x3 stride-2 conv layers per
/// modality (sigmoid in between), so features live at 1/4 of the padded
/// input. Every learned stage of the separation / uncertainty / fusion path
/// hangs off these features.
struct DemoNetwork {
  int channels = 4;
  int intervals = 8;
  int pad_height = 512;
  int pad_width = 1760;

  Conv2d image_conv1, image_conv2;
  Conv2d depth_conv1, depth_conv2;
  Conv2d project_image, project_depth;  // 1x1, C -> C
  BoundHead bound_head;
  Conv2d uncertainty_reduce;  // 1x1, C -> 1
  Conv2d sd_conv;             // 4x4 stride 4, n_d -> C
  Conv2d u_conv;              // 4x4 stride 4, C -> C

  static constexpr int kDownsample = 4;

  int feature_height() const { return pad_height / kDownsample; }
  int feature_width() const { return pad_width / kDownsample; }

  /// Parameters drawn from N(0, 1/fan_in) with a fixed seed.
  static DemoNetwork seeded(const Config& config, std::uint64_t seed);
  /// All parameters zero: uniform bounds and U = 0.5 everywhere.
  static DemoNetwork zeroed(const Config& config);
};

/// Zero-pads (bottom / right) to the network input size. Throws
/// ParameterError if the source is larger than the target.
DepthMap pad_depth(const DepthMap& depth, int height, int width);

struct DemoFeatures {
  FeatureMap image;  // F_I
  FeatureMap depth;  // F_D
  FeatureMap fused;  // F_ID = F_I + F_D
};

/// Encodes the padded depth (and optional RGB image; a zero image otherwise).
DemoFeatures encode(const DemoNetwork& net, const DepthMap& padded_depth, const Image8* image, double d_max);

struct DemoResult {
  DemoFeatures features;
  IntervalPartition partition;
  UncertaintyMap uncertainty;  // cropped to the source size
  SubDepthStack stack;         // source size
  FeatureMap f_sd;
  FeatureMap f_u;
  DecoupledFeatures decoupled;
};

/// Runs the full demo path on a source-sized depth map. With
/// `uniform_bounds` the bound head is bypassed.
DemoResult run_demo(const DemoNetwork& net, const DepthMap& depth, const Image8* image, double d_max,
                    bool uniform_bounds);

/// Bounds for one depth map, from the head or uniform spacing.
IntervalPartition demo_bounds(const DemoNetwork& net, const DepthMap& depth, const Image8* image, double d_max,
                              bool uniform_bounds);

/// Uncertainty map for one depth map, cropped to its size.
UncertaintyMap demo_uncertainty(const DemoNetwork& net, const DepthMap& depth, const Image8* image, double d_max);

struct SeparationStats {
  int intervals = 0;
  std::vector<std::size_t> occupancy;
  std::size_t valid_pixels = 0;
  /// Valid pixels with a 4-neighbor that is invalid or in another interval.
  std::size_t boundary_pixels = 0;
  double boundary_fraction = 0.0;
  /// Mean over layers of the share of valid pixels the layer does not hold.
  double mean_sparsity = 0.0;
};

SeparationStats separation_stats(const DepthMap& depth, const IntervalPartition& partition);

/// Color composite of a stack: each layer gets a palette hue, shaded by depth.
Image8 render_layers(const SubDepthStack& stack, double d_max);

}  // namespace adisep
