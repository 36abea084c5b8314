#include "adisep/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "adisep/errors.hpp"

namespace adisep {

UncertaintyMap::UncertaintyMap(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1) throw ShapeError("uncertainty map dimensions must be >= 1");
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("uncertainty buffer length does not match height*width");
  }
}

UncertaintyTrace uncertainty_forward(const FeatureMap& fused, const Conv2d& reduce, int height, int width) {
  if (reduce.out_channels != 1) throw ShapeError("uncertainty reduce conv must output one channel");
  UncertaintyTrace t;
  t.reduced = conv2d(fused, reduce);
  t.upsampled = bilinear_upsample(t.reduced, height, width);
  t.squashed = sigmoid(t.upsampled);
  std::vector<double> u(t.squashed.size());
  // sigmoid(-x) rather than 1 - sigmoid(x) keeps precision for confident pixels;
  // the clamp keeps U strictly inside (0, 1) once |x| saturates the sigmoid
  const double lo = std::numeric_limits<double>::min(), hi = std::nextafter(1.0, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(sigmoid(-t.upsampled[i]), lo, hi);
  t.uncertainty = FeatureMap(t.squashed.shape(), std::move(u));
  return t;
}

UncertaintyMap compute_uncertainty(const FeatureMap& fused, const Conv2d& reduce, int height, int width) {
  auto t = uncertainty_forward(fused, reduce, height, width);
  const auto v = t.uncertainty.values();
  return UncertaintyMap(height, width, std::vector<double>(v.begin(), v.end()));
}

void compute_uncertainty_backward(FeatureMap& fused, Conv2d& reduce, UncertaintyTrace& trace,
                                  std::span<const double> grad_uncertainty) {
  if (grad_uncertainty.size() != trace.uncertainty.size()) {
    throw ShapeError("compute_uncertainty_backward: gradient length mismatch");
  }
  std::vector<double> g(grad_uncertainty.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -grad_uncertainty[i];
  trace.upsampled.zero_grad();
  trace.reduced.zero_grad();
  sigmoid_backward(trace.upsampled, trace.squashed, g);
  bilinear_upsample_backward(trace.reduced, trace.upsampled.height(), trace.upsampled.width(),
                             trace.upsampled.grad());
  conv2d_backward(fused, reduce, trace.reduced.grad());
}

FeatureMap duplicate_channels(const FeatureMap& single, int channels) {
  if (single.channels() != 1) throw ShapeError("duplicate_channels expects a single-channel map");
  if (channels < 1) throw ShapeError("duplicate_channels: channel count must be >= 1");
  const std::size_t plane = single.size();
  std::vector<double> out(plane * channels);
  for (int c = 0; c < channels; ++c) {
    std::copy(single.values().begin(), single.values().end(), out.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }
  return FeatureMap({channels, single.height(), single.width()}, std::move(out));
}

void duplicate_channels_backward(FeatureMap& single, int channels, std::span<const double> grad_output) {
  const std::size_t plane = single.size();
  if (grad_output.size() != plane * channels) throw ShapeError("duplicate_channels_backward: gradient length");
  std::vector<double> g(plane, 0.0);
  for (int c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) g[p] += grad_output[c * plane + p];
  }
  single.accumulate_grad(g);
}

ApplyTrace apply_uncertainty_forward(const FeatureMap& stack, const FeatureMap& uncertainty) {
  if (uncertainty.channels() != 1 || uncertainty.height() != stack.height() ||
      uncertainty.width() != stack.width()) {
    throw ShapeError("apply_uncertainty: uncertainty map " + std::to_string(uncertainty.height()) + "x" +
                     std::to_string(uncertainty.width()) + " does not match stack " + std::to_string(stack.height()) +
                     "x" + std::to_string(stack.width()));
  }
  ApplyTrace t;
  t.duplicated = duplicate_channels(uncertainty, stack.channels());
  t.product = elementwise_mul(stack, t.duplicated);
  return t;
}

FeatureMap apply_uncertainty(const FeatureMap& stack, const FeatureMap& uncertainty, const Conv2d& conv) {
  return conv2d(apply_uncertainty_forward(stack, uncertainty).product, conv);
}

FeatureMap apply_uncertainty(const SubDepthStack& stack, const UncertaintyMap& u, const Conv2d& conv) {
  return apply_uncertainty(stack.to_feature_map(), u.to_feature_map(), conv);
}

void apply_uncertainty_backward(FeatureMap& stack, FeatureMap& uncertainty, Conv2d& conv, ApplyTrace& trace,
                                std::span<const double> grad_output) {
  trace.product.zero_grad();
  trace.duplicated.zero_grad();
  conv2d_backward(trace.product, conv, grad_output);
  elementwise_mul_backward(stack, trace.duplicated, trace.product.grad());
  duplicate_channels_backward(uncertainty, stack.channels(), trace.duplicated.grad());
}

FeatureMap uncertainty_feature(const FeatureMap& uncertainty, const Conv2d& conv) {
  return conv2d(duplicate_channels(uncertainty, conv.in_channels), conv);
}

void uncertainty_feature_backward(FeatureMap& uncertainty, Conv2d& conv, std::span<const double> grad_output) {
  FeatureMap duplicated = duplicate_channels(uncertainty, conv.in_channels);
  conv2d_backward(duplicated, conv, grad_output);
  duplicate_channels_backward(uncertainty, conv.in_channels, duplicated.grad());
}

DecoupledFeatures fuse_features(const FeatureMap& f_i, const FeatureMap& f_d, const FeatureMap& f_sd,
                                const FeatureMap& f_u) {
  if (f_i.shape() != f_d.shape() || f_d.shape() != f_sd.shape() || f_sd.shape() != f_u.shape()) {
    throw ShapeError("fuse_features: inputs must share one (C, H, W) shape");
  }
  return {add(f_i, f_d), add(add(f_d, f_sd), f_u)};
}

void fuse_features_backward(FeatureMap& f_i, FeatureMap& f_d, FeatureMap& f_sd, FeatureMap& f_u,
                            std::span<const double> grad_appearance, std::span<const double> grad_localization) {
  add_backward(f_i, f_d, grad_appearance);
  f_d.accumulate_grad(grad_localization);
  f_sd.accumulate_grad(grad_localization);
  f_u.accumulate_grad(grad_localization);
}

}  // namespace adisep
