#include "adisep/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "adisep/adis.hpp"
#include "adisep/tensor.hpp"
#include "adisep/uncertainty.hpp"

namespace adisep {

namespace {

using Rng = std::mt19937_64;
using Vec = std::vector<double>;

constexpr double kStep = 1e-5;
constexpr double kCorruption = 1e-3;

Vec randn(Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

FeatureMap random_map(Rng& rng, Shape s, double scale = 1.0) { return FeatureMap(s, randn(rng, s.size(), scale)); }

void randomize(Conv2d& c, Rng& rng, double scale = 0.5) {
  c.kernel.value = randn(rng, c.kernel.size(), scale);
  c.bias.value = randn(rng, c.bias.size(), scale);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec to_vec(std::span<const double> s) { return Vec(s.begin(), s.end()); }

/// Relative error between `analytic` and the central difference of `loss` at x.
class Checker {
 public:
  explicit Checker(bool corrupt) : corrupt_(corrupt) {}

  void check(std::span<const double> x, const std::function<double(std::span<const double>)>& loss,
             std::span<const double> analytic) {
    Vec a = to_vec(analytic);
    if (corrupt_) {
      for (double& g : a) g *= 1.0 + kCorruption;
    }
    const Vec n = numeric_gradient(loss, x, kStep);
    worst_ = std::max(worst_, relative_error(a, n));
  }

  double worst() const { return worst_; }

 private:
  bool corrupt_;
  double worst_ = 0.0;
};

// ---- elementary kernels ------------------------------------------------------

double check_conv2d(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  struct Cfg {
    Shape in;
    int out, k, stride, pad;
  };
  for (const Cfg& cfg : {Cfg{{1, 5, 5}, 1, 3, 1, 0}, Cfg{{2, 6, 5}, 3, 3, 2, 1}}) {
    Conv2d layer(cfg.in.channels, cfg.out, cfg.k, cfg.k, cfg.stride, cfg.pad);
    randomize(layer, rng);
    FeatureMap x = random_map(rng, cfg.in);
    const FeatureMap y = conv2d(x, layer);
    const Vec r = randn(rng, y.size());
    conv2d_backward(x, layer, r);
    ck.check(x.values(), [&](std::span<const double> v) { return dot(r, conv2d(FeatureMap(cfg.in, to_vec(v)), layer).values()); },
             x.grad());
    ck.check(layer.kernel.value, [&](std::span<const double> v) {
      Conv2d l = layer;
      l.kernel.value = to_vec(v);
      return dot(r, conv2d(x, l).values());
    }, layer.kernel.grad);
    ck.check(layer.bias.value, [&](std::span<const double> v) {
      Conv2d l = layer;
      l.bias.value = to_vec(v);
      return dot(r, conv2d(x, l).values());
    }, layer.bias.grad);
  }
  return ck.worst();
}

double check_fully_connected(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  Linear layer(6, 4);
  layer.weight.value = randn(rng, layer.weight.size());
  layer.bias.value = randn(rng, layer.bias.size());
  const Vec x = randn(rng, 6);
  const Vec r = randn(rng, 4);
  Vec gx(6, 0.0);
  fully_connected_backward(x, layer, r, gx);
  ck.check(x, [&](std::span<const double> v) { return dot(r, fully_connected(v, layer)); }, gx);
  ck.check(layer.weight.value, [&](std::span<const double> v) {
    Linear l = layer;
    l.weight.value = to_vec(v);
    return dot(r, fully_connected(x, l));
  }, layer.weight.grad);
  ck.check(layer.bias.value, [&](std::span<const double> v) {
    Linear l = layer;
    l.bias.value = to_vec(v);
    return dot(r, fully_connected(x, l));
  }, layer.bias.grad);
  return ck.worst();
}

double check_sigmoid(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Shape s{2, 4, 5};
  FeatureMap x = random_map(rng, s, 2.0);
  const FeatureMap y = sigmoid(x);
  const Vec r = randn(rng, y.size());
  sigmoid_backward(x, y, r);
  ck.check(x.values(), [&](std::span<const double> v) { return dot(r, sigmoid(FeatureMap(s, to_vec(v))).values()); },
           x.grad());
  return ck.worst();
}

double check_softmax(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Vec x = randn(rng, 7, 2.0);
  const Vec y = softmax(x);
  const Vec r = randn(rng, y.size());
  const Vec g = softmax_backward(y, r);
  ck.check(x, [&](std::span<const double> v) { return dot(r, softmax(v)); }, g);
  return ck.worst();
}

double check_upsample(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Shape s{2, 3, 4};
  FeatureMap x = random_map(rng, s);
  const int oh = 7, ow = 9;
  const FeatureMap y = bilinear_upsample(x, oh, ow);
  const Vec r = randn(rng, y.size());
  bilinear_upsample_backward(x, oh, ow, r);
  ck.check(x.values(), [&](std::span<const double> v) {
    return dot(r, bilinear_upsample(FeatureMap(s, to_vec(v)), oh, ow).values());
  }, x.grad());
  return ck.worst();
}

double check_add(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Shape s{3, 4, 4};
  FeatureMap a = random_map(rng, s), b = random_map(rng, s);
  const Vec r = randn(rng, s.size());
  add_backward(a, b, r);
  ck.check(a.values(), [&](std::span<const double> v) { return dot(r, add(FeatureMap(s, to_vec(v)), b).values()); },
           a.grad());
  ck.check(b.values(), [&](std::span<const double> v) { return dot(r, add(a, FeatureMap(s, to_vec(v))).values()); },
           b.grad());
  return ck.worst();
}

double check_mul(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Shape s{3, 4, 4};
  FeatureMap a = random_map(rng, s), b = random_map(rng, s);
  const Vec r = randn(rng, s.size());
  elementwise_mul_backward(a, b, r);
  ck.check(a.values(), [&](std::span<const double> v) {
    return dot(r, elementwise_mul(FeatureMap(s, to_vec(v)), b).values());
  }, a.grad());
  ck.check(b.values(), [&](std::span<const double> v) {
    return dot(r, elementwise_mul(a, FeatureMap(s, to_vec(v))).values());
  }, b.grad());
  return ck.worst();
}

// ---- composite paths ---------------------------------------------------------

DepthMap random_depth(Rng& rng, int h, int w, double d_max) {
  std::uniform_real_distribution<double> dist(0.5, d_max * 1.1);
  std::bernoulli_distribution keep(0.85);
  std::vector<double> d(static_cast<std::size_t>(h) * w);
  for (double& v : d) v = keep(rng) ? dist(rng) : 0.0;
  return DepthMap(h, w, std::move(d));
}

double check_compute_bounds(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Shape s{3, 3, 4};
  const double d_max = 80.0;
  BoundHead head(s.channels, s.height, s.width, 5);
  head.randomize(rng, 0.5);
  FeatureMap fused = random_map(rng, s);
  auto trace = bound_head_forward(fused, head);
  const Vec r = randn(rng, 5);
  compute_bounds_backward(fused, head, trace, d_max, r);
  auto loss = [&](const FeatureMap& f, const BoundHead& h) {
    return dot(r, compute_bounds(f, h, d_max).widths());
  };
  ck.check(fused.values(), [&](std::span<const double> v) { return loss(FeatureMap(s, to_vec(v)), head); },
           fused.grad());
  ck.check(head.fc.weight.value, [&](std::span<const double> v) {
    BoundHead h = head;
    h.fc.weight.value = to_vec(v);
    return loss(fused, h);
  }, head.fc.weight.grad);
  ck.check(head.reduce.kernel.value, [&](std::span<const double> v) {
    BoundHead h = head;
    h.reduce.kernel.value = to_vec(v);
    return loss(fused, h);
  }, head.reduce.kernel.grad);
  return ck.worst();
}

double check_uncertainty(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Shape s{3, 3, 4};
  const int oh = 6, ow = 8;
  Conv2d reduce(3, 1, 1, 1);
  randomize(reduce, rng);
  FeatureMap fused = random_map(rng, s);
  auto trace = uncertainty_forward(fused, reduce, oh, ow);
  const Vec r = randn(rng, static_cast<std::size_t>(oh) * ow);
  compute_uncertainty_backward(fused, reduce, trace, r);
  ck.check(fused.values(), [&](std::span<const double> v) {
    return dot(r, compute_uncertainty(FeatureMap(s, to_vec(v)), reduce, oh, ow).values());
  }, fused.grad());
  ck.check(reduce.kernel.value, [&](std::span<const double> v) {
    Conv2d c = reduce;
    c.kernel.value = to_vec(v);
    return dot(r, compute_uncertainty(fused, c, oh, ow).values());
  }, reduce.kernel.grad);
  ck.check(reduce.bias.value, [&](std::span<const double> v) {
    Conv2d c = reduce;
    c.bias.value = to_vec(v);
    return dot(r, compute_uncertainty(fused, c, oh, ow).values());
  }, reduce.bias.grad);
  return ck.worst();
}

double check_soft_separate(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const double d_max = 20.0, tau = 0.5;
  const DepthMap dep = random_depth(rng, 6, 7, d_max);
  std::uniform_real_distribution<double> frac(0.2, 1.0);
  Vec widths(5);
  double total = 0.0;
  for (double& w : widths) total += (w = frac(rng));
  for (double& w : widths) w *= d_max / total;
  const auto part = IntervalPartition::from_widths(widths);
  const Vec bounds = to_vec(part.bounds());
  const FeatureMap y = soft_separate(dep, bounds, tau);
  const Vec r = randn(rng, y.size());
  const Vec gb = soft_separate_backward(dep, bounds, tau, r);
  // b_0 is pinned at 0 by the partition; check the free bounds.
  Vec free(bounds.begin() + 1, bounds.end());
  Vec gfree(gb.begin() + 1, gb.end());
  ck.check(free, [&](std::span<const double> v) {
    Vec b{0.0};
    b.insert(b.end(), v.begin(), v.end());
    return dot(r, soft_separate(dep, b, tau).values());
  }, gfree);
  const Vec gw = bounds_grad_to_widths(gb);
  ck.check(widths, [&](std::span<const double> v) {
    return dot(r, soft_separate(dep, IntervalPartition::from_widths(to_vec(v)), tau).values());
  }, gw);
  return ck.worst();
}

double check_apply_uncertainty(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  const Shape ss{4, 6, 6};
  const Shape us{1, 6, 6};
  Conv2d conv(4, 3, 2, 2, 2, 0);
  randomize(conv, rng);
  FeatureMap stack = random_map(rng, ss);
  FeatureMap u = random_map(rng, us);
  auto trace = apply_uncertainty_forward(stack, u);
  const FeatureMap y = conv2d(trace.product, conv);
  const Vec r = randn(rng, y.size());
  apply_uncertainty_backward(stack, u, conv, trace, r);
  ck.check(stack.values(), [&](std::span<const double> v) {
    return dot(r, apply_uncertainty(FeatureMap(ss, to_vec(v)), u, conv).values());
  }, stack.grad());
  ck.check(u.values(), [&](std::span<const double> v) {
    return dot(r, apply_uncertainty(stack, FeatureMap(us, to_vec(v)), conv).values());
  }, u.grad());
  ck.check(conv.kernel.value, [&](std::span<const double> v) {
    Conv2d c = conv;
    c.kernel.value = to_vec(v);
    return dot(r, apply_uncertainty(stack, u, c).values());
  }, conv.kernel.grad);
  return ck.worst();
}

// Full localization / appearance chain: F_I, F_D -> F_ID -> (U, bounds) ->
// soft SD -> F_SD, F_U -> (I_A, I_L). F_D reaches the loss through I_A, I_L,
// the uncertainty map and the interval bounds.
struct ChainModel {
  int channels = 2, fh = 3, fw = 3, up = 2, intervals = 3;
  double d_max = 20.0, tau = 0.5;
  DepthMap depth;
  BoundHead head;
  Conv2d reduce;
  Conv2d sd_conv;
  Conv2d u_conv;
  Vec r_a, r_l;

  int H() const { return fh * up; }
  int W() const { return fw * up; }
  Shape feature_shape() const { return {channels, fh, fw}; }

  double loss(const FeatureMap& f_i, const FeatureMap& f_d) const {
    const FeatureMap fused = add(f_i, f_d);
    const auto u = uncertainty_forward(fused, reduce, H(), W()).uncertainty;
    const auto part = compute_bounds(fused, head, d_max);
    const FeatureMap soft = soft_separate(depth, part, tau);
    const FeatureMap f_sd = apply_uncertainty(soft, u, sd_conv);
    const FeatureMap f_u = uncertainty_feature(u, u_conv);
    const auto out = fuse_features(f_i, f_d, f_sd, f_u);
    return dot(r_a, out.appearance.values()) + dot(r_l, out.localization.values());
  }

  void backward(FeatureMap& f_i, FeatureMap& f_d) {
    FeatureMap fused = add(f_i, f_d);
    auto ut = uncertainty_forward(fused, reduce, H(), W());
    auto bt = bound_head_forward(fused, head);
    const auto part = IntervalPartition::from_fractions(bt.fractions, d_max);
    FeatureMap soft = soft_separate(depth, part, tau);
    auto at = apply_uncertainty_forward(soft, ut.uncertainty);
    const FeatureMap f_sd = conv2d(at.product, sd_conv);
    const FeatureMap f_u = uncertainty_feature(ut.uncertainty, u_conv);

    FeatureMap f_sd_node(f_sd.shape(), to_vec(f_sd.values()));
    FeatureMap f_u_node(f_u.shape(), to_vec(f_u.values()));
    fuse_features_backward(f_i, f_d, f_sd_node, f_u_node, r_a, r_l);

    apply_uncertainty_backward(soft, ut.uncertainty, sd_conv, at, f_sd_node.grad());
    uncertainty_feature_backward(ut.uncertainty, u_conv, f_u_node.grad());

    const Vec gb = soft_separate_backward(depth, part.bounds(), tau, soft.grad());
    compute_bounds_backward(fused, head, bt, d_max, bounds_grad_to_widths(gb));
    compute_uncertainty_backward(fused, reduce, ut, ut.uncertainty.grad());
    add_backward(f_i, f_d, fused.grad());
  }
};

double check_fusion_chain(Rng& rng, bool corrupt) {
  Checker ck(corrupt);
  ChainModel m;
  m.depth = random_depth(rng, m.H(), m.W(), m.d_max);
  m.head = BoundHead(m.channels, m.fh, m.fw, m.intervals);
  m.head.randomize(rng, 0.3);
  m.reduce = Conv2d(m.channels, 1, 1, 1);
  randomize(m.reduce, rng);
  m.sd_conv = Conv2d(m.intervals, m.channels, m.up, m.up, m.up, 0);
  randomize(m.sd_conv, rng, 0.1);
  m.u_conv = Conv2d(m.channels, m.channels, m.up, m.up, m.up, 0);
  randomize(m.u_conv, rng);
  const Shape fs = m.feature_shape();
  m.r_a = randn(rng, fs.size());
  m.r_l = randn(rng, fs.size());
  FeatureMap f_i = random_map(rng, fs);
  FeatureMap f_d = random_map(rng, fs);
  m.backward(f_i, f_d);
  ck.check(f_i.values(), [&](std::span<const double> v) { return m.loss(FeatureMap(fs, to_vec(v)), f_d); }, f_i.grad());
  ck.check(f_d.values(), [&](std::span<const double> v) { return m.loss(f_i, FeatureMap(fs, to_vec(v))); }, f_d.grad());
  return ck.worst();
}

struct Suite {
  const char* name;
  double tolerance;
  double (*run)(Rng&, bool);
};

}  // namespace

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff) / scale;
}

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double step) {
  Vec probe(x.begin(), x.end());
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

std::vector<GradCheckOutcome> run_gradcheck_suite(const GradCheckOptions& options) {
  static const Suite suites[] = {
      {"conv2d", kElementaryTolerance, check_conv2d},
      {"fully_connected", kElementaryTolerance, check_fully_connected},
      {"sigmoid", kElementaryTolerance, check_sigmoid},
      {"softmax", kElementaryTolerance, check_softmax},
      {"bilinear_upsample", kElementaryTolerance, check_upsample},
      {"add", kElementaryTolerance, check_add},
      {"elementwise_mul", kElementaryTolerance, check_mul},
      {"compute_bounds", kCompositeTolerance, check_compute_bounds},
      {"compute_uncertainty", kCompositeTolerance, check_uncertainty},
      {"soft_separate", kCompositeTolerance, check_soft_separate},
      {"apply_uncertainty", kCompositeTolerance, check_apply_uncertainty},
      {"fusion_chain", kCompositeTolerance, check_fusion_chain},
  };
  std::vector<GradCheckOutcome> out;
  for (const auto& s : suites) {
    GradCheckOutcome o;
    o.name = s.name;
    o.tolerance = s.tolerance;
    for (int t = 0; t < options.trials; ++t) {
      Rng rng(options.seed + static_cast<std::uint64_t>(t));
      o.max_rel_error = std::max(o.max_rel_error, s.run(rng, options.corrupt_backward));
      ++o.trials;
    }
    o.passed = o.max_rel_error < o.tolerance;
    out.push_back(o);
  }
  return out;
}

}  // namespace adisep
