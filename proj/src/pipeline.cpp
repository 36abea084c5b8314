#include "adisep/pipeline.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <random>

#include "adisep/errors.hpp"

namespace adisep {

namespace {

constexpr std::array<double, 3> kImageMean{0.485, 0.456, 0.406};
constexpr std::array<double, 3> kImageStd{0.229, 0.224, 0.225};

void fill_normal(Param& p, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : p.value) v = n(rng);
}

void init_conv(Conv2d& c, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(c.in_channels) * c.kernel_h * c.kernel_w;
  fill_normal(c.kernel, rng, 1.0 / std::sqrt(fan_in));
  fill_normal(c.bias, rng, 0.1);
}

DemoNetwork build_shape(const Config& config) {
  config.validate();
  DemoNetwork n;
  const int c = config.feature_channels;
  n.channels = c;
  n.intervals = config.intervals;
  n.pad_height = config.pad_height;
  n.pad_width = config.pad_width;
  n.image_conv1 = Conv2d(3, c, 3, 3, 2, 1);
  n.image_conv2 = Conv2d(c, c, 3, 3, 2, 1);
  n.depth_conv1 = Conv2d(1, c, 3, 3, 2, 1);
  n.depth_conv2 = Conv2d(c, c, 3, 3, 2, 1);
  n.project_image = Conv2d(c, c, 1, 1);
  n.project_depth = Conv2d(c, c, 1, 1);
  n.bound_head = BoundHead(c, n.feature_height(), n.feature_width(), config.intervals);
  n.uncertainty_reduce = Conv2d(c, 1, 1, 1);
  n.sd_conv = Conv2d(config.intervals, c, DemoNetwork::kDownsample, DemoNetwork::kDownsample,
                     DemoNetwork::kDownsample, 0);
  n.u_conv = Conv2d(c, c, DemoNetwork::kDownsample, DemoNetwork::kDownsample, DemoNetwork::kDownsample, 0);
  return n;
}

FeatureMap depth_input(const DepthMap& d, double d_max) {
  std::vector<double> v(d.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (d.valid(i)) v[i] = d.depth(i) / d_max;
  }
  return FeatureMap({1, d.height(), d.width()}, std::move(v));
}

FeatureMap image_input(const Image8* image, int height, int width) {
  FeatureMap zero({3, height, width}, 0.0);
  if (!image) return zero;
  if (image->width > width || image->height > height) {
    throw ParameterError(fmt::format("image {}x{} exceeds padding target {}x{}", image->width, image->height, width,
                                     height));
  }
  std::vector<double> v(static_cast<std::size_t>(3) * height * width, 0.0);
  for (int y = 0; y < image->height; ++y) {
    for (int x = 0; x < image->width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src_c = image->channels == 1 ? 0 : c;
        const double px =
            image->pixels[(static_cast<std::size_t>(y) * image->width + x) * image->channels + src_c] / 255.0;
        v[(static_cast<std::size_t>(c) * height + y) * width + x] = (px - kImageMean[c]) / kImageStd[c];
      }
    }
  }
  return FeatureMap({3, height, width}, std::move(v));
}

UncertaintyMap crop(const FeatureMap& u, int height, int width) {
  std::vector<double> v(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) v[static_cast<std::size_t>(y) * width + x] = u.at(0, y, x);
  }
  return UncertaintyMap(height, width, std::move(v));
}

SubDepthStack crop(const SubDepthStack& s, int height, int width) {
  SubDepthStack out(s.layers(), height, width);
  for (int i = 0; i < s.layers(); ++i) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) out.at(i, y, x) = s.at(i, y, x);
    }
  }
  return out;
}

}  // namespace

DemoNetwork DemoNetwork::seeded(const Config& config, std::uint64_t seed) {
  DemoNetwork n = build_shape(config);
  std::mt19937_64 rng(seed);
  for (Conv2d* c : {&n.image_conv1, &n.image_conv2, &n.depth_conv1, &n.depth_conv2, &n.project_image,
                    &n.project_depth, &n.uncertainty_reduce, &n.sd_conv, &n.u_conv, &n.bound_head.reduce}) {
    init_conv(*c, rng);
  }
  fill_normal(n.bound_head.fc.weight, rng, 1.0 / std::sqrt(static_cast<double>(n.bound_head.fc.in_features)));
  fill_normal(n.bound_head.fc.bias, rng, 0.1);
  return n;
}

DemoNetwork DemoNetwork::zeroed(const Config& config) { return build_shape(config); }

DepthMap pad_depth(const DepthMap& depth, int height, int width) {
  if (depth.height() > height || depth.width() > width) {
    throw ParameterError(fmt::format("depth map {}x{} exceeds padding target {}x{}", depth.width(), depth.height(),
                                     width, height));
  }
  DepthMap out(height, width);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (depth.valid(y, x)) out.set(y, x, depth.depth(y, x));
    }
  }
  return out;
}

DemoFeatures encode(const DemoNetwork& net, const DepthMap& padded, const Image8* image, double d_max) {
  if (padded.height() != net.pad_height || padded.width() != net.pad_width) {
    throw ShapeError("encode expects a depth map padded to the network input size");
  }
  const FeatureMap img = image_input(image, net.pad_height, net.pad_width);
  const FeatureMap dep = depth_input(padded, d_max);
  FeatureMap f_i = conv2d(conv2d(sigmoid(conv2d(img, net.image_conv1)), net.image_conv2), net.project_image);
  FeatureMap f_d = conv2d(conv2d(sigmoid(conv2d(dep, net.depth_conv1)), net.depth_conv2), net.project_depth);
  FeatureMap fused = add(f_i, f_d);
  return {std::move(f_i), std::move(f_d), std::move(fused)};
}

IntervalPartition demo_bounds(const DemoNetwork& net, const DepthMap& depth, const Image8* image, double d_max,
                              bool uniform_bounds) {
  if (uniform_bounds) return IntervalPartition::uniform(net.intervals, d_max);
  const auto feats = encode(net, pad_depth(depth, net.pad_height, net.pad_width), image, d_max);
  return compute_bounds(feats.fused, net.bound_head, d_max);
}

UncertaintyMap demo_uncertainty(const DemoNetwork& net, const DepthMap& depth, const Image8* image, double d_max) {
  const auto feats = encode(net, pad_depth(depth, net.pad_height, net.pad_width), image, d_max);
  const auto u = uncertainty_forward(feats.fused, net.uncertainty_reduce, net.pad_height, net.pad_width).uncertainty;
  return crop(u, depth.height(), depth.width());
}

DemoResult run_demo(const DemoNetwork& net, const DepthMap& depth, const Image8* image, double d_max,
                    bool uniform_bounds) {
  const DepthMap padded = pad_depth(depth, net.pad_height, net.pad_width);
  DemoFeatures feats = encode(net, padded, image, d_max);
  IntervalPartition part = uniform_bounds ? IntervalPartition::uniform(net.intervals, d_max)
                                          : compute_bounds(feats.fused, net.bound_head, d_max);
  const FeatureMap u = uncertainty_forward(feats.fused, net.uncertainty_reduce, net.pad_height, net.pad_width).uncertainty;
  const SubDepthStack full = separate(padded, part);
  FeatureMap f_sd = apply_uncertainty(full.to_feature_map(), u, net.sd_conv);
  FeatureMap f_u = uncertainty_feature(u, net.u_conv);
  DecoupledFeatures dec = fuse_features(feats.image, feats.depth, f_sd, f_u);
  return DemoResult{std::move(feats),
                    std::move(part),
                    crop(u, depth.height(), depth.width()),
                    crop(full, depth.height(), depth.width()),
                    std::move(f_sd),
                    std::move(f_u),
                    std::move(dec)};
}

SeparationStats separation_stats(const DepthMap& depth, const IntervalPartition& partition) {
  SeparationStats s;
  s.intervals = partition.count();
  s.occupancy.assign(partition.count(), 0);
  const int h = depth.height(), w = depth.width();
  std::vector<int> label(depth.size(), -1);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!depth.valid(i)) continue;
    label[i] = partition.interval_of(depth.depth(i));
    ++s.occupancy[label[i]];
    ++s.valid_pixels;
  }
  constexpr int dy[4] = {-1, 1, 0, 0};
  constexpr int dx[4] = {0, 0, -1, 1};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = label[depth.index(y, x)];
      if (l < 0) continue;
      for (int k = 0; k < 4; ++k) {
        const int ny = y + dy[k], nx = x + dx[k];
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        if (label[depth.index(ny, nx)] != l) {
          ++s.boundary_pixels;
          break;
        }
      }
    }
  }
  if (s.valid_pixels > 0) {
    s.boundary_fraction = static_cast<double>(s.boundary_pixels) / static_cast<double>(s.valid_pixels);
    double sum = 0.0;
    for (auto occ : s.occupancy) sum += 1.0 - static_cast<double>(occ) / static_cast<double>(s.valid_pixels);
    s.mean_sparsity = sum / s.intervals;
  }
  return s;
}

Image8 render_layers(const SubDepthStack& stack, double d_max) {
  // Evenly spaced hues around the color wheel, one per layer.
  auto hue = [](double t) {
    const double h = 6.0 * (t - std::floor(t));
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    std::array<double, 3> rgb{};
    switch (sector) {
      case 0: rgb = {1, f, 0}; break;
      case 1: rgb = {1 - f, 1, 0}; break;
      case 2: rgb = {0, 1, f}; break;
      case 3: rgb = {0, 1 - f, 1}; break;
      case 4: rgb = {f, 0, 1}; break;
      default: rgb = {1, 0, 1 - f}; break;
    }
    return rgb;
  };
  Image8 img;
  img.width = stack.width();
  img.height = stack.height();
  img.channels = 3;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
  for (int i = 0; i < stack.layers(); ++i) {
    const auto color = hue(static_cast<double>(i) / stack.layers());
    for (int y = 0; y < stack.height(); ++y) {
      for (int x = 0; x < stack.width(); ++x) {
        const double v = stack.at(i, y, x);
        if (v == 0.0) continue;
        // Nearer pixels are brighter.
        const double shade = 0.35 + 0.65 * (1.0 - std::min(v / d_max, 1.0));
        const std::size_t p = (static_cast<std::size_t>(y) * img.width + x) * 3;
        for (int c = 0; c < 3; ++c) img.pixels[p + c] = static_cast<std::uint8_t>(std::lround(255.0 * color[c] * shade));
      }
    }
  }
  return img;
}

}  // namespace adisep
