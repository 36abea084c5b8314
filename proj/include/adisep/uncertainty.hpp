#pragma once

#include <span>
#include <vector>

#include "adisep/adis.hpp"
#include "adisep/tensor.hpp"

namespace adisep {

/// Per-pixel weight in (0, 1) aligned with the depth map.
class UncertaintyMap {
 public:
  UncertaintyMap() = default;
  UncertaintyMap(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::span<const double> values() const { return values_; }
  double at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Single-channel feature view (1 x H x W).
  FeatureMap to_feature_map() const { return FeatureMap({1, height_, width_}, values_); }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// Forward intermediates of the uncertainty branch.
struct UncertaintyTrace {
  FeatureMap reduced;    // 1 x h x w logits
  FeatureMap upsampled;  // 1 x H x W logits
  FeatureMap squashed;   // sigmoid(upsampled)
  FeatureMap uncertainty;  // 1 - squashed, clamped strictly inside (0, 1)
};

/// U = 1 - sigmoid(upsample(reduce(fused), H, W)), clamped to the open
/// interval. `reduce` maps the fused feature to one channel (normally 1x1).
UncertaintyTrace uncertainty_forward(const FeatureMap& fused, const Conv2d& reduce, int height, int width);
UncertaintyMap compute_uncertainty(const FeatureMap& fused, const Conv2d& reduce, int height, int width);
void compute_uncertainty_backward(FeatureMap& fused, Conv2d& reduce, UncertaintyTrace& trace,
                                  std::span<const double> grad_uncertainty);

/// Repeats a single-channel map across `channels` channels.
FeatureMap duplicate_channels(const FeatureMap& single, int channels);
/// Sums the channel gradients back onto the single-channel source.
void duplicate_channels_backward(FeatureMap& single, int channels, std::span<const double> grad_output);

struct ApplyTrace {
  FeatureMap duplicated;  // U repeated over the n_d channels
  FeatureMap product;     // SD x U
};

/// F_SD = conv(SD x U), U duplicated over the stack's channels.
ApplyTrace apply_uncertainty_forward(const FeatureMap& stack, const FeatureMap& uncertainty);
FeatureMap apply_uncertainty(const FeatureMap& stack, const FeatureMap& uncertainty, const Conv2d& conv);
FeatureMap apply_uncertainty(const SubDepthStack& stack, const UncertaintyMap& u, const Conv2d& conv);
void apply_uncertainty_backward(FeatureMap& stack, FeatureMap& uncertainty, Conv2d& conv, ApplyTrace& trace,
                                std::span<const double> grad_output);

/// F_U: U broadcast to conv.in_channels, then `conv`.
FeatureMap uncertainty_feature(const FeatureMap& uncertainty, const Conv2d& conv);
void uncertainty_feature_backward(FeatureMap& uncertainty, Conv2d& conv, std::span<const double> grad_output);

/// Decoupled features: appearance I_A = F_I + F_D, localization I_L = F_D + F_SD + F_U.
struct DecoupledFeatures {
  FeatureMap appearance;
  FeatureMap localization;
};

DecoupledFeatures fuse_features(const FeatureMap& f_i, const FeatureMap& f_d, const FeatureMap& f_sd,
                                const FeatureMap& f_u);
void fuse_features_backward(FeatureMap& f_i, FeatureMap& f_d, FeatureMap& f_sd, FeatureMap& f_u,
                            std::span<const double> grad_appearance, std::span<const double> grad_localization);

}  // namespace adisep
