#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace adisep {

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense C x H x W tensor of doubles, row-major (channel, row, column).
///
/// Values are fixed at construction. The gradient buffer is allocated lazily
/// and only ever accumulated into, so a map that feeds several consumers
/// collects the sum of their contributions.
class FeatureMap {
 public:
  FeatureMap() = default;
  explicit FeatureMap(Shape shape, double fill = 0.0);
  FeatureMap(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  double at(int c, int y, int x) const { return values_[index(c, y, x)]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  bool has_grad() const { return !grad_.empty(); }
  /// Gradient buffer; zero-initialised on first access.
  std::span<double> grad();
  std::span<const double> grad() const { return grad_; }
  void zero_grad();
  void accumulate_grad(std::span<const double> g);

 private:
  Shape shape_{};
  std::vector<double> values_;
  std::vector<double> grad_;
};

/// Learnable parameter block: values plus an accumulated gradient of equal length.
struct Param {
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  explicit Param(std::size_t n, double fill = 0.0) : value(n, fill), grad(n, 0.0) {}
  explicit Param(std::vector<double> v) : value(std::move(v)), grad(value.size(), 0.0) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// 2D convolution with zero padding. Kernel layout is (out, in, kh, kw).
struct Conv2d {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  Param kernel;
  Param bias;

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kh, int kw, int stride = 1, int padding = 0);

  double& weight(int o, int i, int ky, int kx) {
    return kernel.value[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w + kx];
  }
  double weight(int o, int i, int ky, int kx) const {
    return kernel.value[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w + kx];
  }

  /// Output shape for an input of the given shape; throws ShapeError when empty or mismatched.
  Shape output_shape(const Shape& in) const;
  void zero_grad() {
    kernel.zero_grad();
    bias.zero_grad();
  }

  /// 1x1 convolution whose kernel is the identity matrix (requires in == out).
  static Conv2d identity(int channels);
};

/// Dense layer y = W x + b with W stored row-major (out, in).
struct Linear {
  int in_features = 1;
  int out_features = 1;
  Param weight;
  Param bias;

  Linear() = default;
  Linear(int in, int out);
  void zero_grad() {
    weight.zero_grad();
    bias.zero_grad();
  }
};

// ---- forward kernels -------------------------------------------------------

FeatureMap conv2d(const FeatureMap& input, const Conv2d& layer);
std::vector<double> fully_connected(std::span<const double> input, const Linear& layer);
FeatureMap sigmoid(const FeatureMap& input);
double sigmoid(double x);
std::vector<double> softmax(std::span<const double> logits);
FeatureMap bilinear_upsample(const FeatureMap& input, int out_height, int out_width);
FeatureMap add(const FeatureMap& a, const FeatureMap& b);
FeatureMap elementwise_mul(const FeatureMap& a, const FeatureMap& b);

// ---- backward kernels ------------------------------------------------------
//
// Each backward accumulates (+=) into the gradient buffers of its inputs and
// parameters. `grad_output` has the shape of the forward result.

void conv2d_backward(FeatureMap& input, Conv2d& layer, std::span<const double> grad_output);
void fully_connected_backward(std::span<const double> input, Linear& layer,
                              std::span<const double> grad_output, std::span<double> grad_input);
void sigmoid_backward(FeatureMap& input, const FeatureMap& output, std::span<const double> grad_output);
/// Returns dL/dlogits given the softmax output and dL/doutput.
std::vector<double> softmax_backward(std::span<const double> output, std::span<const double> grad_output);
void bilinear_upsample_backward(FeatureMap& input, int out_height, int out_width,
                                std::span<const double> grad_output);
void add_backward(FeatureMap& a, FeatureMap& b, std::span<const double> grad_output);
void elementwise_mul_backward(FeatureMap& a, FeatureMap& b, std::span<const double> grad_output);

}  // namespace adisep
