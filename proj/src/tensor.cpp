#include "adisep/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adisep/errors.hpp"

namespace adisep {

namespace {

void check_shape(const Shape& s) {
  if (s.channels < 1 || s.height < 1 || s.width < 1) {
    throw ShapeError("tensor dimensions must be >= 1, got " + std::to_string(s.channels) + "x" +
                     std::to_string(s.height) + "x" + std::to_string(s.width));
  }
}

void check_grad_len(std::size_t expected, std::size_t got, const char* op) {
  if (expected != got) {
    throw ShapeError(std::string(op) + ": gradient length " + std::to_string(got) + " != " +
                     std::to_string(expected));
  }
}

// Source coordinate and blend weight for align_corners=false resampling.
struct Tap {
  int lo;
  int hi;
  double frac;
};

Tap bilinear_tap(int dst, int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  double src = (dst + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  int lo = static_cast<int>(std::floor(src));
  if (lo > in_size - 1) lo = in_size - 1;
  const int hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, src - lo};
}

}  // namespace

FeatureMap::FeatureMap(Shape shape, double fill) : shape_(shape) {
  check_shape(shape_);
  values_.assign(shape_.size(), fill);
}

FeatureMap::FeatureMap(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_.size()) {
    throw ShapeError("value buffer length " + std::to_string(values_.size()) + " does not match shape size " +
                     std::to_string(shape_.size()));
  }
}

std::span<double> FeatureMap::grad() {
  if (grad_.empty()) grad_.assign(values_.size(), 0.0);
  return grad_;
}

void FeatureMap::zero_grad() {
  if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), 0.0);
}

void FeatureMap::accumulate_grad(std::span<const double> g) {
  check_grad_len(values_.size(), g.size(), "accumulate_grad");
  auto dst = grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

Conv2d::Conv2d(int in_ch, int out_ch, int kh, int kw, int stride_, int padding_)
    : in_channels(in_ch),
      out_channels(out_ch),
      kernel_h(kh),
      kernel_w(kw),
      stride(stride_),
      padding(padding_),
      kernel(static_cast<std::size_t>(out_ch) * in_ch * kh * kw),
      bias(static_cast<std::size_t>(out_ch)) {
  if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1) throw ShapeError("conv2d: dimensions must be >= 1");
  if (stride < 1) throw ParameterError("conv2d: stride must be >= 1");
  if (padding < 0) throw ParameterError("conv2d: padding must be >= 0");
}

Conv2d Conv2d::identity(int channels) {
  Conv2d c(channels, channels, 1, 1);
  for (int i = 0; i < channels; ++i) c.weight(i, i, 0, 0) = 1.0;
  return c;
}

Shape Conv2d::output_shape(const Shape& in) const {
  if (in.channels != in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(in.channels) + " channels, kernel expects " +
                     std::to_string(in_channels));
  }
  if (stride < 1) throw ParameterError("conv2d: stride must be >= 1");
  if (padding < 0) throw ParameterError("conv2d: padding must be >= 0");
  const int span_h = in.height + 2 * padding - kernel_h;
  const int span_w = in.width + 2 * padding - kernel_w;
  if (span_h < 0 || span_w < 0) throw ShapeError("conv2d: kernel larger than padded input");
  return {out_channels, span_h / stride + 1, span_w / stride + 1};
}

Linear::Linear(int in, int out)
    : in_features(in),
      out_features(out),
      weight(static_cast<std::size_t>(in) * out),
      bias(static_cast<std::size_t>(out)) {
  if (in < 1 || out < 1) throw ShapeError("linear: dimensions must be >= 1");
}

FeatureMap conv2d(const FeatureMap& input, const Conv2d& layer) {
  const Shape os = layer.output_shape(input.shape());
  std::vector<double> out(os.size());
  const int ih = input.height(), iw = input.width();
  for (int o = 0; o < os.channels; ++o) {
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        double acc = layer.bias.value[o];
        for (int c = 0; c < layer.in_channels; ++c) {
          for (int ky = 0; ky < layer.kernel_h; ++ky) {
            const int y = oy * layer.stride - layer.padding + ky;
            if (y < 0 || y >= ih) continue;
            for (int kx = 0; kx < layer.kernel_w; ++kx) {
              const int x = ox * layer.stride - layer.padding + kx;
              if (x < 0 || x >= iw) continue;
              acc += layer.weight(o, c, ky, kx) * input.at(c, y, x);
            }
          }
        }
        out[(static_cast<std::size_t>(o) * os.height + oy) * os.width + ox] = acc;
      }
    }
  }
  return FeatureMap(os, std::move(out));
}

void conv2d_backward(FeatureMap& input, Conv2d& layer, std::span<const double> grad_output) {
  const Shape os = layer.output_shape(input.shape());
  check_grad_len(os.size(), grad_output.size(), "conv2d_backward");
  const int ih = input.height(), iw = input.width();
  auto gin = input.grad();
  for (int o = 0; o < os.channels; ++o) {
    for (int oy = 0; oy < os.height; ++oy) {
      for (int ox = 0; ox < os.width; ++ox) {
        const double g = grad_output[(static_cast<std::size_t>(o) * os.height + oy) * os.width + ox];
        layer.bias.grad[o] += g;
        for (int c = 0; c < layer.in_channels; ++c) {
          for (int ky = 0; ky < layer.kernel_h; ++ky) {
            const int y = oy * layer.stride - layer.padding + ky;
            if (y < 0 || y >= ih) continue;
            for (int kx = 0; kx < layer.kernel_w; ++kx) {
              const int x = ox * layer.stride - layer.padding + kx;
              if (x < 0 || x >= iw) continue;
              const std::size_t wi =
                  ((static_cast<std::size_t>(o) * layer.in_channels + c) * layer.kernel_h + ky) * layer.kernel_w + kx;
              const std::size_t xi = input.index(c, y, x);
              layer.kernel.grad[wi] += g * input[xi];
              gin[xi] += g * layer.kernel.value[wi];
            }
          }
        }
      }
    }
  }
}

std::vector<double> fully_connected(std::span<const double> input, const Linear& layer) {
  if (input.size() != static_cast<std::size_t>(layer.in_features)) {
    throw ShapeError("fully_connected: input length " + std::to_string(input.size()) + " != " +
                     std::to_string(layer.in_features));
  }
  std::vector<double> out(layer.out_features);
  for (int m = 0; m < layer.out_features; ++m) {
    double acc = layer.bias.value[m];
    const double* row = layer.weight.value.data() + static_cast<std::size_t>(m) * layer.in_features;
    for (int n = 0; n < layer.in_features; ++n) acc += row[n] * input[n];
    out[m] = acc;
  }
  return out;
}

void fully_connected_backward(std::span<const double> input, Linear& layer, std::span<const double> grad_output,
                              std::span<double> grad_input) {
  if (input.size() != static_cast<std::size_t>(layer.in_features)) {
    throw ShapeError("fully_connected_backward: input length mismatch");
  }
  check_grad_len(layer.out_features, grad_output.size(), "fully_connected_backward");
  check_grad_len(layer.in_features, grad_input.size(), "fully_connected_backward");
  for (int m = 0; m < layer.out_features; ++m) {
    const double g = grad_output[m];
    layer.bias.grad[m] += g;
    const std::size_t row = static_cast<std::size_t>(m) * layer.in_features;
    for (int n = 0; n < layer.in_features; ++n) {
      layer.weight.grad[row + n] += g * input[n];
      grad_input[n] += g * layer.weight.value[row + n];
    }
  }
}

double sigmoid(double x) {
  // Branch on sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FeatureMap sigmoid(const FeatureMap& input) {
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(input[i]);
  return FeatureMap(input.shape(), std::move(out));
}

void sigmoid_backward(FeatureMap& input, const FeatureMap& output, std::span<const double> grad_output) {
  if (input.shape() != output.shape()) throw ShapeError("sigmoid_backward: input/output shape mismatch");
  check_grad_len(output.size(), grad_output.size(), "sigmoid_backward");
  auto gin = input.grad();
  for (std::size_t i = 0; i < gin.size(); ++i) {
    const double s = output[i];
    gin[i] += grad_output[i] * s * (1.0 - s);
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty input");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> softmax_backward(std::span<const double> output, std::span<const double> grad_output) {
  check_grad_len(output.size(), grad_output.size(), "softmax_backward");
  double dot = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) dot += output[i] * grad_output[i];
  std::vector<double> g(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) g[i] = output[i] * (grad_output[i] - dot);
  return g;
}

FeatureMap bilinear_upsample(const FeatureMap& input, int out_height, int out_width) {
  if (out_height < input.height() || out_width < input.width()) {
    throw ShapeError("bilinear_upsample: target " + std::to_string(out_height) + "x" + std::to_string(out_width) +
                     " smaller than source " + std::to_string(input.height()) + "x" +
                     std::to_string(input.width()));
  }
  const Shape os{input.channels(), out_height, out_width};
  std::vector<double> out(os.size());
  std::vector<Tap> xs(out_width);
  for (int x = 0; x < out_width; ++x) xs[x] = bilinear_tap(x, input.width(), out_width);
  for (int c = 0; c < os.channels; ++c) {
    for (int y = 0; y < out_height; ++y) {
      const Tap ty = bilinear_tap(y, input.height(), out_height);
      for (int x = 0; x < out_width; ++x) {
        const Tap& tx = xs[x];
        const double top = (1.0 - tx.frac) * input.at(c, ty.lo, tx.lo) + tx.frac * input.at(c, ty.lo, tx.hi);
        const double bot = (1.0 - tx.frac) * input.at(c, ty.hi, tx.lo) + tx.frac * input.at(c, ty.hi, tx.hi);
        out[(static_cast<std::size_t>(c) * out_height + y) * out_width + x] = (1.0 - ty.frac) * top + ty.frac * bot;
      }
    }
  }
  return FeatureMap(os, std::move(out));
}

void bilinear_upsample_backward(FeatureMap& input, int out_height, int out_width, std::span<const double> grad_output) {
  if (out_height < input.height() || out_width < input.width()) {
    throw ShapeError("bilinear_upsample_backward: target smaller than source");
  }
  check_grad_len(static_cast<std::size_t>(input.channels()) * out_height * out_width, grad_output.size(),
                 "bilinear_upsample_backward");
  auto gin = input.grad();
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < out_height; ++y) {
      const Tap ty = bilinear_tap(y, input.height(), out_height);
      for (int x = 0; x < out_width; ++x) {
        const Tap tx = bilinear_tap(x, input.width(), out_width);
        const double g = grad_output[(static_cast<std::size_t>(c) * out_height + y) * out_width + x];
        gin[input.index(c, ty.lo, tx.lo)] += g * (1.0 - ty.frac) * (1.0 - tx.frac);
        gin[input.index(c, ty.lo, tx.hi)] += g * (1.0 - ty.frac) * tx.frac;
        gin[input.index(c, ty.hi, tx.lo)] += g * ty.frac * (1.0 - tx.frac);
        gin[input.index(c, ty.hi, tx.hi)] += g * ty.frac * tx.frac;
      }
    }
  }
}

FeatureMap add(const FeatureMap& a, const FeatureMap& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return FeatureMap(a.shape(), std::move(out));
}

FeatureMap elementwise_mul(const FeatureMap& a, const FeatureMap& b) {
  if (a.shape() != b.shape()) throw ShapeError("elementwise_mul: shape mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return FeatureMap(a.shape(), std::move(out));
}

void add_backward(FeatureMap& a, FeatureMap& b, std::span<const double> grad_output) {
  if (a.shape() != b.shape()) throw ShapeError("add_backward: shape mismatch");
  a.accumulate_grad(grad_output);
  b.accumulate_grad(grad_output);
}

void elementwise_mul_backward(FeatureMap& a, FeatureMap& b, std::span<const double> grad_output) {
  if (a.shape() != b.shape()) throw ShapeError("elementwise_mul_backward: shape mismatch");
  check_grad_len(a.size(), grad_output.size(), "elementwise_mul_backward");
  std::vector<double> ga(a.size()), gb(b.size());
  for (std::size_t i = 0; i < ga.size(); ++i) {
    ga[i] = grad_output[i] * b[i];
    gb[i] = grad_output[i] * a[i];
  }
  a.accumulate_grad(ga);
  b.accumulate_grad(gb);
}

}  // namespace adisep
