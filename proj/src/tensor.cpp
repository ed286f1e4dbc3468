#include "addl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "dct_basis.hpp"

namespace addl {

namespace {

thread_local bool g_grad_enabled = true;

void ensure_finite(const std::vector<double>& v, const char* op_name) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw ValueError(std::string(op_name) + ": non-finite value produced/accepted");
    }
  }
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int e : s) {
    if (e < 0) throw ValueError("negative shape extent");
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op_name) {
  if (a.shape() != b.shape()) {
    throw ValueError(std::string(op_name) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, double v, bool requires_grad) {
  return from_data(shape, std::vector<double>(shape_numel(shape), v), requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
  if (data.size() != shape_numel(shape)) {
    throw ValueError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  ensure_finite(data, "tensor");
  auto n = std::make_shared<TensorNode>();
  n->shape = shape;
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

double Tensor::item() const {
  if (size() != 1) throw ValueError("item() on tensor of size " + std::to_string(size()));
  return node_->value[0];
}

Tensor Tensor::detach() const {
  return from_data(node_->shape, node_->value, false);
}

void Tensor::backward() const {
  if (size() != 1) throw ValueError("backward() requires a scalar result");
  // Iterative topological order over the recorded tape.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      TensorNode* p = n->parents[idx++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop && n->grad.size() == n->value.size()) n->backprop(*n);
  }
}

Tensor make_op_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backprop, const char* op_name) {
  if (value.size() != shape_numel(shape)) {
    throw ValueError(std::string(op_name) + ": internal size mismatch");
  }
  ensure_finite(value, op_name);
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  for (const Tensor& p : parents) needs = needs || p.requires_grad();
  if (needs && grad_enabled()) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const Tensor& p : parents) n->parents.push_back(p.node_ptr());
    n->backprop = std::move(backprop);
  }
  struct Access : Tensor {
    explicit Access(std::shared_ptr<TensorNode> n) : Tensor(std::move(n)) {}
  };
  return Access(std::move(n));
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

// Helper: gradient buffer of parent i, allocated on demand.
std::vector<double>& pgrad(TensorNode& n, std::size_t i) {
  n.parents[i]->ensure_grad();
  return n.parents[i]->grad;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto &av = a.data(), &bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op_result(
      a.shape(), std::move(out), {a, b},
      [](TensorNode& n) {
        for (std::size_t p = 0; p < 2; ++p) {
          if (!n.parents[p]->requires_grad) continue;
          auto& g = pgrad(n, p);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto &av = a.data(), &bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op_result(
      a.shape(), std::move(out), {a, b},
      [](TensorNode& n) {
        if (n.parents[0]->requires_grad) {
          auto& g = pgrad(n, 0);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
          auto& g = pgrad(n, 1);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
        }
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto &av = a.data(), &bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op_result(
      a.shape(), std::move(out), {a, b},
      [](TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
          auto& g = pgrad(n, 0);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
        }
        if (n.parents[1]->requires_grad) {
          auto& g = pgrad(n, 1);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
        }
      },
      "mul");
}

Tensor scale(const Tensor& a, double k) {
  std::vector<double> out(a.size());
  const auto& av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * k;
  return make_op_result(
      a.shape(), std::move(out), {a},
      [k](TensorNode& n) {
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * k;
      },
      "scale");
}

Tensor add_scalar(const Tensor& a, double k) {
  std::vector<double> out(a.size());
  const auto& av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + k;
  return make_op_result(
      a.shape(), std::move(out), {a},
      [](TensorNode& n) {
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      },
      "add_scalar");
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return make_op_result(
      x.shape(), std::move(out), {x},
      [](TensorNode& n) {
        const auto& v = n.parents[0]->value;
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (v[i] > 0.0) g[i] += n.grad[i];
        }
      },
      "relu");
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
  // Reuse forward values in backward: y' = y (1 - y).
  auto y = std::make_shared<std::vector<double>>(out);
  return make_op_result(
      x.shape(), std::move(out), {x},
      [y](TensorNode& n) {
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = (*y)[i];
          g[i] += n.grad[i] * s * (1.0 - s);
        }
      },
      "sigmoid");
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, v[i]));
  return make_op_result(
      x.shape(), std::move(out), {x},
      [lo, hi](TensorNode& n) {
        const auto& v = n.parents[0]->value;
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (v[i] > lo && v[i] < hi) g[i] += n.grad[i];
        }
      },
      "clamp");
}

Tensor wrap_periodic(const Tensor& x, double lo, double period) {
  if (period <= 0.0) throw ValueError("wrap_periodic: period must be positive");
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double t = v[i] - lo;
    t -= period * std::floor(t / period);
    // floor rounding can land exactly on `period` for values just below lo
    if (t >= period) t -= period;
    out[i] = lo + t;
  }
  return make_op_result(
      x.shape(), std::move(out), {x},
      [](TensorNode& n) {
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      },
      "wrap_periodic");
}

// ---------------------------------------------------------------------------
// structure

namespace {

void require_nchw(const Tensor& x, const char* op_name) {
  if (x.rank() != 4) {
    throw ValueError(std::string(op_name) + ": expected NCHW tensor, got " +
                     shape_str(x.shape()));
  }
}

}  // namespace

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_nchw(a, "concat_channels");
  require_nchw(b, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ValueError("concat_channels: incompatible shapes " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<double> out(static_cast<std::size_t>(N) * (Ca + Cb) * plane);
  const auto &av = a.data(), &bv = b.data();
  for (int n = 0; n < N; ++n) {
    double* dst = out.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane;
    std::memcpy(dst, av.data() + static_cast<std::size_t>(n) * Ca * plane,
                Ca * plane * sizeof(double));
    std::memcpy(dst + Ca * plane, bv.data() + static_cast<std::size_t>(n) * Cb * plane,
                Cb * plane * sizeof(double));
  }
  return make_op_result(
      {N, Ca + Cb, H, W}, std::move(out), {a, b},
      [Ca, Cb, plane](TensorNode& n) {
        const int N = n.shape[0];
        for (int i = 0; i < N; ++i) {
          const double* src = n.grad.data() + static_cast<std::size_t>(i) * (Ca + Cb) * plane;
          if (n.parents[0]->requires_grad) {
            auto& g = pgrad(n, 0);
            double* dst = g.data() + static_cast<std::size_t>(i) * Ca * plane;
            for (std::size_t k = 0; k < Ca * plane; ++k) dst[k] += src[k];
          }
          if (n.parents[1]->requires_grad) {
            auto& g = pgrad(n, 1);
            double* dst = g.data() + static_cast<std::size_t>(i) * Cb * plane;
            for (std::size_t k = 0; k < Cb * plane; ++k) dst[k] += src[Ca * plane + k];
          }
        }
      },
      "concat_channels");
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
  require_nchw(x, "slice_channels");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (c0 < 0 || c1 > C || c0 >= c1) throw ValueError("slice_channels: bad range");
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const int Cs = c1 - c0;
  std::vector<double> out(static_cast<std::size_t>(N) * Cs * plane);
  const auto& v = x.data();
  for (int n = 0; n < N; ++n) {
    std::memcpy(out.data() + static_cast<std::size_t>(n) * Cs * plane,
                v.data() + (static_cast<std::size_t>(n) * C + c0) * plane,
                Cs * plane * sizeof(double));
  }
  return make_op_result(
      {N, Cs, H, W}, std::move(out), {x},
      [c0, Cs, C, plane](TensorNode& n) {
        auto& g = pgrad(n, 0);
        const int N = n.shape[0];
        for (int i = 0; i < N; ++i) {
          const double* src = n.grad.data() + static_cast<std::size_t>(i) * Cs * plane;
          double* dst = g.data() + (static_cast<std::size_t>(i) * C + c0) * plane;
          for (std::size_t k = 0; k < Cs * plane; ++k) dst[k] += src[k];
        }
      },
      "slice_channels");
}

namespace {

// Symmetric (edge-inclusive) reflection of index i into [0, n).
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

Tensor reflect_pad2d(const Tensor& x, int left, int right, int top, int bottom) {
  require_nchw(x, "reflect_pad2d");
  if (left < 0 || right < 0 || top < 0 || bottom < 0) {
    throw ValueError("reflect_pad2d: negative padding");
  }
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = H + top + bottom, Wo = W + left + right;
  std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
  const auto& v = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = v.data() + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.data() + static_cast<std::size_t>(nc) * Ho * Wo;
    for (int y = 0; y < Ho; ++y) {
      const int sy = reflect_index(y - top, H);
      for (int xw = 0; xw < Wo; ++xw) {
        dst[y * Wo + xw] = src[sy * W + reflect_index(xw - left, W)];
      }
    }
  }
  return make_op_result(
      {N, C, Ho, Wo}, std::move(out), {x},
      [left, top, H, W, Ho, Wo](TensorNode& n) {
        auto& g = pgrad(n, 0);
        const int NC = n.shape[0] * n.shape[1];
        for (int nc = 0; nc < NC; ++nc) {
          const double* src = n.grad.data() + static_cast<std::size_t>(nc) * Ho * Wo;
          double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
          for (int y = 0; y < Ho; ++y) {
            const int sy = reflect_index(y - top, H);
            for (int xw = 0; xw < Wo; ++xw) {
              dst[sy * W + reflect_index(xw - left, W)] += src[y * Wo + xw];
            }
          }
        }
      },
      "reflect_pad2d");
}

Tensor crop2d(const Tensor& x, int top, int left, int h, int w) {
  require_nchw(x, "crop2d");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (top < 0 || left < 0 || h <= 0 || w <= 0 || top + h > H || left + w > W) {
    throw ValueError("crop2d: window out of bounds");
  }
  std::vector<double> out(static_cast<std::size_t>(N) * C * h * w);
  const auto& v = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = v.data() + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.data() + static_cast<std::size_t>(nc) * h * w;
    for (int y = 0; y < h; ++y) {
      std::memcpy(dst + static_cast<std::size_t>(y) * w, src + (top + y) * W + left,
                  w * sizeof(double));
    }
  }
  return make_op_result(
      {N, C, h, w}, std::move(out), {x},
      [top, left, h, w, H, W](TensorNode& n) {
        auto& g = pgrad(n, 0);
        const int NC = n.shape[0] * n.shape[1];
        for (int nc = 0; nc < NC; ++nc) {
          const double* src = n.grad.data() + static_cast<std::size_t>(nc) * h * w;
          double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
          for (int y = 0; y < h; ++y) {
            for (int xw = 0; xw < w; ++xw) dst[(top + y) * W + left + xw] += src[y * w + xw];
          }
        }
      },
      "crop2d");
}

Tensor nearest_resize(const Tensor& x, int h, int w) {
  require_nchw(x, "nearest_resize");
  if (h <= 0 || w <= 0) throw ValueError("nearest_resize: bad target size");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  std::vector<int> ys(h), xs(w);
  for (int y = 0; y < h; ++y) ys[y] = std::min(H - 1, y * H / h);
  for (int xw = 0; xw < w; ++xw) xs[xw] = std::min(W - 1, xw * W / w);
  std::vector<double> out(static_cast<std::size_t>(N) * C * h * w);
  const auto& v = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = v.data() + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.data() + static_cast<std::size_t>(nc) * h * w;
    for (int y = 0; y < h; ++y) {
      for (int xw = 0; xw < w; ++xw) dst[y * w + xw] = src[ys[y] * W + xs[xw]];
    }
  }
  return make_op_result(
      {N, C, h, w}, std::move(out), {x},
      [ys, xs, h, w, H, W](TensorNode& n) {
        auto& g = pgrad(n, 0);
        const int NC = n.shape[0] * n.shape[1];
        for (int nc = 0; nc < NC; ++nc) {
          const double* src = n.grad.data() + static_cast<std::size_t>(nc) * h * w;
          double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
          for (int y = 0; y < h; ++y) {
            for (int xw = 0; xw < w; ++xw) dst[ys[y] * W + xs[xw]] += src[y * w + xw];
          }
        }
      },
      "nearest_resize");
}

// ---------------------------------------------------------------------------
// losses

Tensor dot_sum(const Tensor& x, const Tensor& weights) {
  check_same_shape(x, weights, "dot_sum");
  const auto &xv = x.data(), &wv = weights.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * wv[i];
  return make_op_result(
      {1}, {acc}, {x, weights},
      [](TensorNode& n) {
        const double g0 = n.grad[0];
        const auto& xv = n.parents[0]->value;
        const auto& wv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
          auto& g = pgrad(n, 0);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * wv[i];
        }
        if (n.parents[1]->requires_grad) {
          auto& g = pgrad(n, 1);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += g0 * xv[i];
        }
      },
      "dot_sum");
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "l1_loss");
  const auto &pv = pred.data(), &tv = target.data();
  const double inv_n = 1.0 / static_cast<double>(pv.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) acc += std::abs(pv[i] - tv[i]);
  return make_op_result(
      {1}, {acc * inv_n}, {pred, target},
      [inv_n](TensorNode& n) {
        const auto& pv = n.parents[0]->value;
        const auto& tv = n.parents[1]->value;
        const double g0 = n.grad[0] * inv_n;
        if (n.parents[0]->requires_grad) {
          auto& g = pgrad(n, 0);
          for (std::size_t i = 0; i < pv.size(); ++i) {
            const double d = pv[i] - tv[i];
            g[i] += g0 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
          }
        }
        if (n.parents[1]->requires_grad) {
          auto& g = pgrad(n, 1);
          for (std::size_t i = 0; i < pv.size(); ++i) {
            const double d = pv[i] - tv[i];
            g[i] -= g0 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
          }
        }
      },
      "l1_loss");
}

namespace {

inline double wrap_signed(double d, double period) {
  d -= period * std::floor(d / period + 0.5);
  // map -period/2 onto +period/2 so the interval is (-p/2, p/2]
  if (d <= -0.5 * period) d += period;
  return d;
}

}  // namespace

Tensor l1_loss_wrapped(const Tensor& pred, const Tensor& target, double period) {
  check_same_shape(pred, target, "l1_loss_wrapped");
  if (period <= 0.0) throw ValueError("l1_loss_wrapped: period must be positive");
  const auto &pv = pred.data(), &tv = target.data();
  const double inv_n = 1.0 / static_cast<double>(pv.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) acc += std::abs(wrap_signed(pv[i] - tv[i], period));
  return make_op_result(
      {1}, {acc * inv_n}, {pred, target},
      [inv_n, period](TensorNode& n) {
        const auto& pv = n.parents[0]->value;
        const auto& tv = n.parents[1]->value;
        const double g0 = n.grad[0] * inv_n;
        for (std::size_t p = 0; p < 2; ++p) {
          if (!n.parents[p]->requires_grad) continue;
          const double sgn_p = p == 0 ? 1.0 : -1.0;
          auto& g = pgrad(n, p);
          for (std::size_t i = 0; i < pv.size(); ++i) {
            const double d = wrap_signed(pv[i] - tv[i], period);
            g[i] += sgn_p * g0 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
          }
        }
      },
      "l1_loss_wrapped");
}

// ---------------------------------------------------------------------------
// quantization surrogates

Tensor differentiable_round(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = std::round(v[i]);
    const double t = v[i] - r;
    out[i] = r + t * t * t;
  }
  return make_op_result(
      x.shape(), std::move(out), {x},
      [](TensorNode& n) {
        const auto& v = n.parents[0]->value;
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double t = v[i] - std::round(v[i]);
          g[i] += n.grad[i] * 3.0 * t * t;
        }
      },
      "differentiable_round");
}

Tensor ste_round(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::round(v[i]);
  return make_op_result(
      x.shape(), std::move(out), {x},
      [](TensorNode& n) {
        auto& g = pgrad(n, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      },
      "ste_round");
}

// ---------------------------------------------------------------------------
// 8x8 block transforms

namespace {

// dir=+1: coeff = A x A^T (forward); dir=-1: pixel = A^T x A (inverse).
void transform_block(const double* src, double* dst, int stride, bool forward) {
  double tmp[64];
  // rows
  for (int y = 0; y < 8; ++y) {
    for (int k = 0; k < 8; ++k) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) {
        acc += (forward ? detail::kDctBasis8[k][n] : detail::kDctBasis8[n][k]) * src[y * stride + n];
      }
      tmp[y * 8 + k] = acc;
    }
  }
  // columns
  for (int x = 0; x < 8; ++x) {
    for (int k = 0; k < 8; ++k) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) {
        acc += (forward ? detail::kDctBasis8[k][n] : detail::kDctBasis8[n][k]) * tmp[n * 8 + x];
      }
      dst[k * stride + x] = acc;
    }
  }
}

void transform_plane(const double* src, double* dst, int H, int W, bool forward) {
  for (int by = 0; by < H; by += 8) {
    for (int bx = 0; bx < W; bx += 8) {
      transform_block(src + by * W + bx, dst + by * W + bx, W, forward);
    }
  }
}

Tensor block_transform(const Tensor& x, bool forward, const char* op_name) {
  require_nchw(x, op_name);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 8 != 0 || W % 8 != 0) {
    throw ValueError(std::string(op_name) + ": dims must be multiples of 8");
  }
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    transform_plane(v.data() + static_cast<std::size_t>(nc) * H * W,
                    out.data() + static_cast<std::size_t>(nc) * H * W, H, W, forward);
  }
  return make_op_result(
      x.shape(), std::move(out), {x},
      [forward, H, W](TensorNode& n) {
        // The basis is orthonormal, so the adjoint is the opposite transform.
        auto& g = pgrad(n, 0);
        const int NC = n.shape[0] * n.shape[1];
        std::vector<double> tmp(static_cast<std::size_t>(H) * W);
        for (int nc = 0; nc < NC; ++nc) {
          transform_plane(n.grad.data() + static_cast<std::size_t>(nc) * H * W, tmp.data(), H,
                          W, !forward);
          double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
          for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] += tmp[i];
        }
      },
      op_name);
}

Tensor table_scale(const Tensor& x, const std::array<double, 64>& tbl, bool divide,
                   const char* op_name) {
  require_nchw(x, op_name);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 8 != 0 || W % 8 != 0) {
    throw ValueError(std::string(op_name) + ": dims must be multiples of 8");
  }
  std::array<double, 64> f{};
  for (int i = 0; i < 64; ++i) {
    if (tbl[i] == 0.0) throw ValueError(std::string(op_name) + ": zero table entry");
    f[i] = divide ? 1.0 / tbl[i] : tbl[i];
  }
  std::vector<double> out(x.size());
  const auto& v = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = v.data() + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.data() + static_cast<std::size_t>(nc) * H * W;
    for (int y = 0; y < H; ++y) {
      for (int xw = 0; xw < W; ++xw) {
        dst[y * W + xw] = src[y * W + xw] * f[(y % 8) * 8 + (xw % 8)];
      }
    }
  }
  return make_op_result(
      x.shape(), std::move(out), {x},
      [f, H, W](TensorNode& n) {
        auto& g = pgrad(n, 0);
        const int NC = n.shape[0] * n.shape[1];
        for (int nc = 0; nc < NC; ++nc) {
          const double* src = n.grad.data() + static_cast<std::size_t>(nc) * H * W;
          double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
          for (int y = 0; y < H; ++y) {
            for (int xw = 0; xw < W; ++xw) {
              dst[y * W + xw] += src[y * W + xw] * f[(y % 8) * 8 + (xw % 8)];
            }
          }
        }
      },
      op_name);
}

}  // namespace

Tensor block_dct8(const Tensor& x) { return block_transform(x, true, "block_dct8"); }
Tensor block_idct8(const Tensor& x) { return block_transform(x, false, "block_idct8"); }

Tensor mul_table8(const Tensor& x, const std::array<double, 64>& tbl) {
  return table_scale(x, tbl, false, "mul_table8");
}

Tensor div_table8(const Tensor& x, const std::array<double, 64>& tbl) {
  return table_scale(x, tbl, true, "div_table8");
}

}  // namespace addl
