#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "adisep/depth_map.hpp"
#include "adisep/tensor.hpp"

namespace adisep {

/// Contiguous distance intervals [b_{i-1}, b_i) covering [0, D_max).
///
/// Bounds are the cumulative sums of the widths with b_0 = 0; the stored
/// bounds are authoritative for membership tests.
class IntervalPartition {
 public:
  /// Widths d_i = fractions_i * d_max. Fractions must be positive.
  static IntervalPartition from_fractions(std::span<const double> fractions, double d_max);
  static IntervalPartition from_widths(std::vector<double> widths);
  /// Explicit bounds (b_0 = 0, strictly increasing).
  static IntervalPartition from_bounds(std::vector<double> bounds);
  static IntervalPartition uniform(int count, double d_max);

  int count() const { return static_cast<int>(widths_.size()); }
  double d_max() const { return bounds_.back(); }
  std::span<const double> widths() const { return widths_; }
  std::span<const double> bounds() const { return bounds_; }
  double lower(int i) const { return bounds_[i]; }
  double upper(int i) const { return bounds_[i + 1]; }

  /// Zero-based interval holding a non-negative depth. Depths at or beyond the
  /// last interior bound map to the last interval.
  int interval_of(double meters) const;

 private:
  IntervalPartition(std::vector<double> widths, std::vector<double> bounds);

  std::vector<double> widths_;
  std::vector<double> bounds_;
};

/// n_d sub-depth maps sharing one H x W grid. Layer values are meters, 0 = empty.
class SubDepthStack {
 public:
  SubDepthStack(int layers, int height, int width);

  int layers() const { return layers_; }
  int height() const { return height_; }
  int width() const { return width_; }

  std::span<const double> layer(int i) const;
  std::span<double> layer(int i);
  double at(int i, int y, int x) const { return data_[offset(i, y, x)]; }
  double& at(int i, int y, int x) { return data_[offset(i, y, x)]; }

  /// Nonzero pixel count of each layer.
  std::vector<std::size_t> occupancy() const;
  /// n_d-channel view of the stack for the convolution stage.
  FeatureMap to_feature_map() const;

 private:
  std::size_t offset(int i, int y, int x) const {
    return (static_cast<std::size_t>(i) * height_ + y) * width_ + x;
  }

  int layers_;
  int height_;
  int width_;
  std::vector<double> data_;
};

/// Distance-bound head: 1x1 conv to one channel, flatten, one dense layer to
/// n_d logits, softmax. Built for a fixed feature spatial size.
struct BoundHead {
  Conv2d reduce;
  Linear fc;
  int feature_height = 1;
  int feature_width = 1;

  BoundHead() = default;
  BoundHead(int channels, int feature_height, int feature_width, int intervals);

  int intervals() const { return fc.out_features; }
  void zero_grad() {
    reduce.zero_grad();
    fc.zero_grad();
  }
  /// Fills every parameter with N(0, scale^2) draws.
  void randomize(std::mt19937_64& rng, double scale);
};

/// Intermediates of a head evaluation, kept for the backward pass.
struct BoundHeadTrace {
  FeatureMap reduced;
  std::vector<double> logits;
  std::vector<double> softmax;    // raw softmax(logits)
  std::vector<double> fractions;  // softmax floored at kMinIntervalFraction, renormalised
};

/// Smallest share of D_max an interval may get. A near one-hot softmax would
/// otherwise leave widths below the double spacing near D_max, so the bounds
/// could not stay strictly increasing.
inline constexpr double kMinIntervalFraction = 1e-12;

BoundHeadTrace bound_head_forward(const FeatureMap& fused, const BoundHead& head);

/// Widths = softmax(head(fused)) * d_max, with each fraction floored at kMinIntervalFraction.
IntervalPartition compute_bounds(const FeatureMap& fused, const BoundHead& head, double d_max);

/// Backpropagates dL/dwidths into the head parameters and the fused feature.
void compute_bounds_backward(FeatureMap& fused, BoundHead& head, const BoundHeadTrace& trace, double d_max,
                             std::span<const double> grad_widths);

/// Hard separation: a valid pixel is copied into the single interval that
/// contains it; invalid pixels are zero in every layer.
SubDepthStack separate(const DepthMap& depth, const IntervalPartition& partition);

/// Pixelwise sum of the layers.
DepthMap reconstruct(const SubDepthStack& stack);

/// Soft membership of each valid pixel in each interval, n_d x H x W:
/// w_i(v) = sigmoid((v - b_{i-1})/tau) - sigmoid((v - b_i)/tau). The last
/// interval has no upper edge (w = sigmoid((v - b_{n_d-1})/tau)) so that it
/// agrees with the clamping of far depths in separate(). Invalid pixels get 0.
FeatureMap soft_interval_weights(const DepthMap& depth, std::span<const double> bounds, double tau);

/// Differentiable surrogate of separate(): soft_interval_weights() * depth.
FeatureMap soft_separate(const DepthMap& depth, std::span<const double> bounds, double tau);
FeatureMap soft_separate(const DepthMap& depth, const IntervalPartition& partition, double tau);

/// dL/db for every bound b_0..b_{n_d} given dL/d(soft stack).
std::vector<double> soft_separate_backward(const DepthMap& depth, std::span<const double> bounds, double tau,
                                           std::span<const double> grad_output);

/// Chain rule through b_i = sum_{j<=i} d_j: dL/dd_j = sum_{i>=j} dL/db_i.
std::vector<double> bounds_grad_to_widths(std::span<const double> grad_bounds);

}  // namespace adisep
