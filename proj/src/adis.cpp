#include "adisep/adis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adisep/errors.hpp"

namespace adisep {

namespace {

constexpr double kBoundTolerance = 1e-9;

void check_bounds(std::span<const double> bounds) {
  if (bounds.size() < 2) throw ParameterError("partition needs at least one interval");
  if (bounds.front() != 0.0) throw ParameterError("first bound must be 0");
  for (std::size_t i = 1; i < bounds.size(); ++i) {
    if (!std::isfinite(bounds[i]) || !(bounds[i] > bounds[i - 1])) {
      throw ParameterError("bounds must be finite and strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

// Floors tiny fractions and renormalises. Untouched (bit-identical) when no
// fraction is below the floor.
std::vector<double> floor_fractions(const std::vector<double>& raw) {
  if (std::all_of(raw.begin(), raw.end(), [](double f) { return f >= kMinIntervalFraction; })) return raw;
  std::vector<double> out(raw.size());
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) total += (out[i] = std::max(raw[i], kMinIntervalFraction));
  for (double& f : out) f /= total;
  return out;
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("temperature must be > 0");
}

}  // namespace

IntervalPartition::IntervalPartition(std::vector<double> widths, std::vector<double> bounds)
    : widths_(std::move(widths)), bounds_(std::move(bounds)) {}

IntervalPartition IntervalPartition::from_widths(std::vector<double> widths) {
  if (widths.empty()) throw ParameterError("partition needs at least one interval");
  std::vector<double> bounds(widths.size() + 1, 0.0);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (!(widths[i] > 0.0) || !std::isfinite(widths[i])) {
      throw ParameterError("interval widths must be positive (index " + std::to_string(i) + ")");
    }
    bounds[i + 1] = bounds[i] + widths[i];
  }
  check_bounds(bounds);
  return IntervalPartition(std::move(widths), std::move(bounds));
}

IntervalPartition IntervalPartition::from_fractions(std::span<const double> fractions, double d_max) {
  if (!(d_max > 0.0) || !std::isfinite(d_max)) throw ParameterError("D_max must be > 0");
  std::vector<double> widths(fractions.size());
  for (std::size_t i = 0; i < fractions.size(); ++i) widths[i] = fractions[i] * d_max;
  auto p = from_widths(std::move(widths));
  if (std::abs(p.d_max() - d_max) > kBoundTolerance) {
    throw ParameterError("interval fractions do not sum to 1");
  }
  return p;
}

IntervalPartition IntervalPartition::from_bounds(std::vector<double> bounds) {
  check_bounds(bounds);
  std::vector<double> widths(bounds.size() - 1);
  for (std::size_t i = 0; i < widths.size(); ++i) widths[i] = bounds[i + 1] - bounds[i];
  return IntervalPartition(std::move(widths), std::move(bounds));
}

IntervalPartition IntervalPartition::uniform(int count, double d_max) {
  if (count < 1) throw ParameterError("interval count must be >= 1");
  std::vector<double> fractions(count, 1.0 / count);
  return from_fractions(fractions, d_max);
}

int IntervalPartition::interval_of(double meters) const {
  // Interior bounds b_1..b_{n-1}; the count of those <= v is the interval index.
  const auto first = bounds_.begin() + 1;
  const auto last = bounds_.end() - 1;
  return static_cast<int>(std::upper_bound(first, last, meters) - first);
}

SubDepthStack::SubDepthStack(int layers, int height, int width) : layers_(layers), height_(height), width_(width) {
  if (layers < 1 || height < 1 || width < 1) throw ShapeError("sub-depth stack dimensions must be >= 1");
  data_.assign(static_cast<std::size_t>(layers) * height * width, 0.0);
}

std::span<const double> SubDepthStack::layer(int i) const {
  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(i) * n, n);
}

std::span<double> SubDepthStack::layer(int i) {
  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  return std::span<double>(data_).subspan(static_cast<std::size_t>(i) * n, n);
}

std::vector<std::size_t> SubDepthStack::occupancy() const {
  std::vector<std::size_t> counts(layers_, 0);
  for (int i = 0; i < layers_; ++i) {
    const auto l = layer(i);
    counts[i] = static_cast<std::size_t>(std::count_if(l.begin(), l.end(), [](double v) { return v != 0.0; }));
  }
  return counts;
}

FeatureMap SubDepthStack::to_feature_map() const { return FeatureMap({layers_, height_, width_}, data_); }

BoundHead::BoundHead(int channels, int feature_height_, int feature_width_, int intervals)
    : reduce(channels, 1, 1, 1),
      fc(feature_height_ * feature_width_, intervals),
      feature_height(feature_height_),
      feature_width(feature_width_) {}

void BoundHead::randomize(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto* p : {&reduce.kernel, &reduce.bias, &fc.weight, &fc.bias}) {
    for (double& v : p->value) v = n(rng);
  }
}

BoundHeadTrace bound_head_forward(const FeatureMap& fused, const BoundHead& head) {
  if (fused.height() != head.feature_height || fused.width() != head.feature_width) {
    throw ShapeError("bound head built for " + std::to_string(head.feature_height) + "x" +
                     std::to_string(head.feature_width) + " features, got " + std::to_string(fused.height()) + "x" +
                     std::to_string(fused.width()));
  }
  BoundHeadTrace t;
  t.reduced = conv2d(fused, head.reduce);
  t.logits = fully_connected(t.reduced.values(), head.fc);
  t.softmax = softmax(t.logits);
  t.fractions = floor_fractions(t.softmax);
  return t;
}

IntervalPartition compute_bounds(const FeatureMap& fused, const BoundHead& head, double d_max) {
  return IntervalPartition::from_fractions(bound_head_forward(fused, head).fractions, d_max);
}

void compute_bounds_backward(FeatureMap& fused, BoundHead& head, const BoundHeadTrace& trace, double d_max,
                             std::span<const double> grad_widths) {
  if (grad_widths.size() != trace.fractions.size()) throw ShapeError("compute_bounds_backward: gradient length");
  std::vector<double> grad_fractions(grad_widths.begin(), grad_widths.end());
  for (double& g : grad_fractions) g *= d_max;
  if (trace.fractions != trace.softmax) {
    // through f'_j = g_j / sum(g), g_j = max(f_j, floor); floored entries pass no gradient
    double total = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < trace.softmax.size(); ++j) {
      total += std::max(trace.softmax[j], kMinIntervalFraction);
      dot += grad_fractions[j] * trace.fractions[j];
    }
    for (std::size_t j = 0; j < grad_fractions.size(); ++j) {
      grad_fractions[j] = trace.softmax[j] > kMinIntervalFraction ? (grad_fractions[j] - dot) / total : 0.0;
    }
  }
  const auto grad_logits = softmax_backward(trace.softmax, grad_fractions);
  std::vector<double> grad_flat(trace.reduced.size(), 0.0);
  fully_connected_backward(trace.reduced.values(), head.fc, grad_logits, grad_flat);
  conv2d_backward(fused, head.reduce, grad_flat);
}

SubDepthStack separate(const DepthMap& depth, const IntervalPartition& partition) {
  SubDepthStack stack(partition.count(), depth.height(), depth.width());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.valid(y, x)) continue;
      const double v = depth.depth(y, x);
      stack.at(partition.interval_of(v), y, x) = v;
    }
  }
  return stack;
}

DepthMap reconstruct(const SubDepthStack& stack) {
  std::vector<double> sum(static_cast<std::size_t>(stack.height()) * stack.width(), 0.0);
  for (int i = 0; i < stack.layers(); ++i) {
    const auto l = stack.layer(i);
    for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += l[p];
  }
  return DepthMap(stack.height(), stack.width(), std::move(sum));
}

FeatureMap soft_interval_weights(const DepthMap& depth, std::span<const double> bounds, double tau) {
  check_tau(tau);
  check_bounds(bounds);
  const int n = static_cast<int>(bounds.size()) - 1;
  const std::size_t plane = depth.size();
  std::vector<double> w(static_cast<std::size_t>(n) * plane, 0.0);
  for (std::size_t p = 0; p < plane; ++p) {
    if (!depth.valid(p)) continue;
    const double v = depth.depth(p);
    for (int i = 0; i < n; ++i) {
      const double lo = sigmoid((v - bounds[i]) / tau);
      const double hi = (i == n - 1) ? 0.0 : sigmoid((v - bounds[i + 1]) / tau);
      w[static_cast<std::size_t>(i) * plane + p] = lo - hi;
    }
  }
  return FeatureMap({n, depth.height(), depth.width()}, std::move(w));
}

FeatureMap soft_separate(const DepthMap& depth, std::span<const double> bounds, double tau) {
  const FeatureMap w = soft_interval_weights(depth, bounds, tau);
  const std::size_t plane = depth.size();
  std::vector<double> out(w.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = w[k] * depth.depth(k % plane);
  return FeatureMap(w.shape(), std::move(out));
}

FeatureMap soft_separate(const DepthMap& depth, const IntervalPartition& partition, double tau) {
  return soft_separate(depth, partition.bounds(), tau);
}

std::vector<double> soft_separate_backward(const DepthMap& depth, std::span<const double> bounds, double tau,
                                           std::span<const double> grad_output) {
  check_tau(tau);
  check_bounds(bounds);
  const int n = static_cast<int>(bounds.size()) - 1;
  const std::size_t plane = depth.size();
  if (grad_output.size() != static_cast<std::size_t>(n) * plane) {
    throw ShapeError("soft_separate_backward: gradient length mismatch");
  }
  std::vector<double> grad(bounds.size(), 0.0);
  for (std::size_t p = 0; p < plane; ++p) {
    if (!depth.valid(p)) continue;
    const double v = depth.depth(p);
    for (int i = 0; i < n; ++i) {
      const double g = grad_output[static_cast<std::size_t>(i) * plane + p] * v / tau;
      const double s_lo = sigmoid((v - bounds[i]) / tau);
      grad[i] -= g * s_lo * (1.0 - s_lo);
      if (i != n - 1) {
        const double s_hi = sigmoid((v - bounds[i + 1]) / tau);
        grad[i + 1] += g * s_hi * (1.0 - s_hi);
      }
    }
  }
  return grad;
}

std::vector<double> bounds_grad_to_widths(std::span<const double> grad_bounds) {
  if (grad_bounds.size() < 2) throw ShapeError("bounds gradient needs at least two entries");
  std::vector<double> g(grad_bounds.size() - 1, 0.0);
  double suffix = 0.0;
  for (std::size_t j = g.size(); j-- > 0;) {
    suffix += grad_bounds[j + 1];
    g[j] = suffix;
  }
  return g;
}

}  // namespace adisep
