#ifndef ADDL_TENSOR_HPP_
#define ADDL_TENSOR_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "addl/common.hpp"

namespace addl {

using Shape = std::vector<int>;

// Reverse-mode autodiff over dense 64-bit tensors.  Values are immutable once
// an op has produced them; gradients accumulate in a fixed order, so repeated
// runs of the same graph are bit-identical.  One graph (one training step)
// stays on one thread; individual ops may fan work out internally because
// every output element is written by exactly one worker.
struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;  // pulls this->grad into parents

  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double v, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t size() const { return node_->value.size(); }

  const std::vector<double>& data() const { return node_->value; }
  // Mutable access is for leaf tensors (weights, inputs) only; writing to an
  // op result would desynchronize the recorded tape.
  std::vector<double>& mutable_data() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
  void clear_grad() { node_->grad.clear(); }

  double item() const;

  // Reverse pass from a scalar result.
  void backward() const;

  // Leaf copy of the current value; gradients do not flow past it.
  Tensor detach() const;

  TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<TensorNode>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_op_result(Shape shape, std::vector<double> value,
                               std::vector<Tensor> parents,
                               std::function<void(TensorNode&)> backprop,
                               const char* op_name);
};

// While a guard is alive, ops do not record the tape (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Shared constructor for ops: validates finiteness of the produced values and
// wires parents/backprop when the tape is active.
Tensor make_op_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backprop, const char* op_name);

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
void check_same_shape(const Tensor& a, const Tensor& b, const char* op_name);

// ---- elementwise / arithmetic -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Clamp with zero gradient outside (lo, hi).
Tensor clamp(const Tensor& x, double lo, double hi);
inline Tensor clamp01(const Tensor& x) { return clamp(x, 0.0, 1.0); }
// Wraps values into [lo, lo + period); gradient is identity (piecewise shift).
Tensor wrap_periodic(const Tensor& x, double lo, double period);

// ---- structure -----------------------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int c0, int c1);
Tensor reflect_pad2d(const Tensor& x, int left, int right, int top, int bottom);
Tensor crop2d(const Tensor& x, int top, int left, int h, int w);
// Nearest-neighbor resample to (h, w); backward sums over duplicated sites.
Tensor nearest_resize(const Tensor& x, int h, int w);

// ---- convolution & resampling ---------------------------------------------

// out = (in + 2*pad - k) / stride + 1; the division must be exact.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

// Stride-2 upsampling transposed convolution; output spatial dims are exactly
// 2x the input.  Weight layout (inC, outC, kH, kW); adjoint of a stride-2
// conv2d with the same kernel and padding.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad);

// 2x2 stride-2 max pooling; gradient routes to the first maximum in row-major
// window order.
Tensor maxpool2(const Tensor& x);

// Factor-2 bilinear upsampling, align-corners=false, edge-replicating.
Tensor bilinear_up2(const Tensor& x);

// ---- losses ---------------------------------------------------------------

// Scalar sum(x .* weights); the workhorse reduction for losses and checks.
Tensor dot_sum(const Tensor& x, const Tensor& weights);

// Mean absolute error; gradient is sign(pred - target) / N (0 at ties).
Tensor l1_loss(const Tensor& pred, const Tensor& target);
// Same, but differences are wrapped into (-period/2, period/2] first.
Tensor l1_loss_wrapped(const Tensor& pred, const Tensor& target, double period);

// ---- quantization surrogates -----------------------------------------------

// round(x) + (x - round(x))^3; gradient 3*(x - round(x))^2 (round constant).
Tensor differentiable_round(const Tensor& x);
// Hard rounding forward, identity gradient (straight-through).
Tensor ste_round(const Tensor& x);

// ---- 8x8 block transforms (H, W multiples of 8) -----------------------------

Tensor block_dct8(const Tensor& x);
Tensor block_idct8(const Tensor& x);
// Elementwise scale by an 8x8 table tiled over the plane.
Tensor mul_table8(const Tensor& x, const std::array<double, 64>& tbl);
Tensor div_table8(const Tensor& x, const std::array<double, 64>& tbl);

// ---- layers ----------------------------------------------------------------

struct ConvLayer {
  Tensor w;  // outC x inC x kH x kW
  Tensor b;  // outC
  int stride = 1;
  int pad = 0;

  Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
};

struct ConvTransposeLayer {
  Tensor w;  // inC x outC x kH x kW
  Tensor b;  // outC
  int pad = 0;

  Tensor forward(const Tensor& x) const { return conv_transpose2d(x, w, b, pad); }
};

}  // namespace addl

#endif  // ADDL_TENSOR_HPP_
