#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "addl/common.hpp"
#include "addl/tensor.hpp"

namespace addl {

namespace {

std::vector<double>& pgrad(TensorNode& n, std::size_t i) {
  n.parents[i]->ensure_grad();
  return n.parents[i]->grad;
}

void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                     bool transposed) {
  if (x.rank() != 4) throw ValueError("conv: input must be NCHW, got " + shape_str(x.shape()));
  if (w.rank() != 4) throw ValueError("conv: weight must be 4-D, got " + shape_str(w.shape()));
  if (b.rank() != 1) throw ValueError("conv: bias must be 1-D");
  if (w.dim(2) < 1 || w.dim(3) < 1) throw ValueError("conv: kernel dims must be >= 1");
  if (stride < 1 || pad < 0) throw ValueError("conv: bad stride/padding");
  const int in_c = transposed ? w.dim(0) : w.dim(1);
  const int out_c = transposed ? w.dim(1) : w.dim(0);
  if (x.dim(1) != in_c) {
    throw ValueError("conv: input has " + std::to_string(x.dim(1)) + " channels, kernel expects " +
                     std::to_string(in_c));
  }
  if (b.dim(0) != out_c) throw ValueError("conv: bias length mismatch");
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  check_conv_args(x, w, b, stride, pad, false);
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), kH = w.dim(2), kW = w.dim(3);
  if ((H + 2 * pad - kH) % stride != 0 || (W + 2 * pad - kW) % stride != 0) {
    throw ValueError("conv2d: output size (in + 2p - k)/stride + 1 not integral for input " +
                     shape_str(x.shape()));
  }
  const int Ho = (H + 2 * pad - kH) / stride + 1;
  const int Wo = (W + 2 * pad - kW) / stride + 1;
  if (Ho <= 0 || Wo <= 0) throw ValueError("conv2d: empty output");

  std::vector<double> out(static_cast<std::size_t>(N) * Cout * Ho * Wo);
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  const double* bd = b.data().data();
  double* od = out.data();

  parallel_for(N * Cout, [&](int job) {
    const int n = job / Cout, oc = job % Cout;
    double* dst = od + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
    std::fill(dst, dst + static_cast<std::size_t>(Ho) * Wo, bd[oc]);
    for (int ic = 0; ic < Cin; ++ic) {
      const double* src = xd + (static_cast<std::size_t>(n) * Cin + ic) * H * W;
      const double* wk = wd + (static_cast<std::size_t>(oc) * Cin + ic) * kH * kW;
      for (int ky = 0; ky < kH; ++ky) {
        for (int kx = 0; kx < kW; ++kx) {
          const double wv = wk[ky * kW + kx];
          if (wv == 0.0) continue;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            const double* srow = src + static_cast<std::size_t>(iy) * W;
            double* drow = dst + static_cast<std::size_t>(oy) * Wo;
            if (stride == 1) {
              const int off = kx - pad;
              const int ox0 = std::max(0, -off), ox1 = std::min(Wo, W - off);
              for (int ox = ox0; ox < ox1; ++ox) drow[ox] += wv * srow[ox + off];
            } else {
              for (int ox = 0; ox < Wo; ++ox) {
                const int ix = ox * stride - pad + kx;
                if (ix >= 0 && ix < W) drow[ox] += wv * srow[ix];
              }
            }
          }
        }
      }
    }
  });

  auto backprop = [N, Cin, Cout, H, W, Ho, Wo, kH, kW, stride, pad](TensorNode& node) {
    const double* go = node.grad.data();
    const double* xd = node.parents[0]->value.data();
    const double* wd = node.parents[1]->value.data();
    if (node.parents[0]->requires_grad) {
      double* gx = pgrad(node, 0).data();
      parallel_for(N * Cin, [&](int job) {
        const int n = job / Cin, ic = job % Cin;
        double* dst = gx + (static_cast<std::size_t>(n) * Cin + ic) * H * W;
        for (int oc = 0; oc < Cout; ++oc) {
          const double* gplane = go + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
          const double* wk = wd + (static_cast<std::size_t>(oc) * Cin + ic) * kH * kW;
          for (int ky = 0; ky < kH; ++ky) {
            for (int kx = 0; kx < kW; ++kx) {
              const double wv = wk[ky * kW + kx];
              if (wv == 0.0) continue;
              for (int oy = 0; oy < Ho; ++oy) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= H) continue;
                double* drow = dst + static_cast<std::size_t>(iy) * W;
                const double* grow = gplane + static_cast<std::size_t>(oy) * Wo;
                if (stride == 1) {
                  const int off = kx - pad;
                  const int ox0 = std::max(0, -off), ox1 = std::min(Wo, W - off);
                  for (int ox = ox0; ox < ox1; ++ox) drow[ox + off] += wv * grow[ox];
                } else {
                  for (int ox = 0; ox < Wo; ++ox) {
                    const int ix = ox * stride - pad + kx;
                    if (ix >= 0 && ix < W) drow[ix] += wv * grow[ox];
                  }
                }
              }
            }
          }
        }
      });
    }
    if (node.parents[1]->requires_grad) {
      double* gw = pgrad(node, 1).data();
      parallel_for(Cout, [&](int oc) {
        for (int ic = 0; ic < Cin; ++ic) {
          double* wk = gw + (static_cast<std::size_t>(oc) * Cin + ic) * kH * kW;
          for (int ky = 0; ky < kH; ++ky) {
            for (int kx = 0; kx < kW; ++kx) {
              double acc = 0.0;
              for (int n = 0; n < N; ++n) {
                const double* src = xd + (static_cast<std::size_t>(n) * Cin + ic) * H * W;
                const double* gplane = go + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                  const int iy = oy * stride - pad + ky;
                  if (iy < 0 || iy >= H) continue;
                  const double* srow = src + static_cast<std::size_t>(iy) * W;
                  const double* grow = gplane + static_cast<std::size_t>(oy) * Wo;
                  if (stride == 1) {
                    const int off = kx - pad;
                    const int ox0 = std::max(0, -off), ox1 = std::min(Wo, W - off);
                    for (int ox = ox0; ox < ox1; ++ox) acc += grow[ox] * srow[ox + off];
                  } else {
                    for (int ox = 0; ox < Wo; ++ox) {
                      const int ix = ox * stride - pad + kx;
                      if (ix >= 0 && ix < W) acc += grow[ox] * srow[ix];
                    }
                  }
                }
              }
              wk[ky * kW + kx] += acc;
            }
          }
        }
      });
    }
    if (node.parents[2]->requires_grad) {
      double* gb = pgrad(node, 2).data();
      for (int oc = 0; oc < Cout; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) {
          const double* gplane = go + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
          for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) acc += gplane[i];
        }
        gb[oc] += acc;
      }
    }
  };

  return make_op_result({N, Cout, Ho, Wo}, std::move(out), {x, w, b}, backprop, "conv2d");
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  check_conv_args(x, w, b, /*stride=*/2, pad, true);
  const int N = x.dim(0), Cin = x.dim(1), h = x.dim(2), wd_ = x.dim(3);
  const int Cout = w.dim(1), kH = w.dim(2), kW = w.dim(3);
  const int Ho = 2 * h, Wo = 2 * wd_;

  std::vector<double> out(static_cast<std::size_t>(N) * Cout * Ho * Wo);
  const double* xd = x.data().data();
  const double* wv = w.data().data();
  const double* bd = b.data().data();
  double* od = out.data();

  parallel_for(N * Cout, [&](int job) {
    const int n = job / Cout, oc = job % Cout;
    double* dst = od + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
    std::fill(dst, dst + static_cast<std::size_t>(Ho) * Wo, bd[oc]);
    for (int ic = 0; ic < Cin; ++ic) {
      const double* src = xd + (static_cast<std::size_t>(n) * Cin + ic) * h * wd_;
      const double* wk = wv + (static_cast<std::size_t>(ic) * Cout + oc) * kH * kW;
      for (int ky = 0; ky < kH; ++ky) {
        for (int kx = 0; kx < kW; ++kx) {
          const double we = wk[ky * kW + kx];
          if (we == 0.0) continue;
          for (int i = 0; i < h; ++i) {
            const int oy = 2 * i + ky - pad;
            if (oy < 0 || oy >= Ho) continue;
            const double* srow = src + static_cast<std::size_t>(i) * wd_;
            double* drow = dst + static_cast<std::size_t>(oy) * Wo;
            for (int j = 0; j < wd_; ++j) {
              const int ox = 2 * j + kx - pad;
              if (ox >= 0 && ox < Wo) drow[ox] += we * srow[j];
            }
          }
        }
      }
    }
  });

  auto backprop = [N, Cin, Cout, h, wd_, Ho, Wo, kH, kW, pad](TensorNode& node) {
    const double* go = node.grad.data();
    const double* xd = node.parents[0]->value.data();
    const double* wv = node.parents[1]->value.data();
    if (node.parents[0]->requires_grad) {
      double* gx = pgrad(node, 0).data();
      parallel_for(N * Cin, [&](int job) {
        const int n = job / Cin, ic = job % Cin;
        double* dst = gx + (static_cast<std::size_t>(n) * Cin + ic) * h * wd_;
        for (int oc = 0; oc < Cout; ++oc) {
          const double* gplane = go + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
          const double* wk = wv + (static_cast<std::size_t>(ic) * Cout + oc) * kH * kW;
          for (int ky = 0; ky < kH; ++ky) {
            for (int kx = 0; kx < kW; ++kx) {
              const double we = wk[ky * kW + kx];
              if (we == 0.0) continue;
              for (int i = 0; i < h; ++i) {
                const int oy = 2 * i + ky - pad;
                if (oy < 0 || oy >= Ho) continue;
                double* drow = dst + static_cast<std::size_t>(i) * wd_;
                const double* grow = gplane + static_cast<std::size_t>(oy) * Wo;
                for (int j = 0; j < wd_; ++j) {
                  const int ox = 2 * j + kx - pad;
                  if (ox >= 0 && ox < Wo) drow[j] += we * grow[ox];
                }
              }
            }
          }
        }
      });
    }
    if (node.parents[1]->requires_grad) {
      double* gw = pgrad(node, 1).data();
      parallel_for(Cin, [&](int ic) {
        for (int oc = 0; oc < Cout; ++oc) {
          double* wk = gw + (static_cast<std::size_t>(ic) * Cout + oc) * kH * kW;
          for (int ky = 0; ky < kH; ++ky) {
            for (int kx = 0; kx < kW; ++kx) {
              double acc = 0.0;
              for (int n = 0; n < N; ++n) {
                const double* src = xd + (static_cast<std::size_t>(n) * Cin + ic) * h * wd_;
                const double* gplane = go + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
                for (int i = 0; i < h; ++i) {
                  const int oy = 2 * i + ky - pad;
                  if (oy < 0 || oy >= Ho) continue;
                  const double* srow = src + static_cast<std::size_t>(i) * wd_;
                  const double* grow = gplane + static_cast<std::size_t>(oy) * Wo;
                  for (int j = 0; j < wd_; ++j) {
                    const int ox = 2 * j + kx - pad;
                    if (ox >= 0 && ox < Wo) acc += srow[j] * grow[ox];
                  }
                }
              }
              wk[ky * kW + kx] += acc;
            }
          }
        }
      });
    }
    if (node.parents[2]->requires_grad) {
      double* gb = pgrad(node, 2).data();
      for (int oc = 0; oc < Cout; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) {
          const double* gplane = go + (static_cast<std::size_t>(n) * Cout + oc) * Ho * Wo;
          for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) acc += gplane[i];
        }
        gb[oc] += acc;
      }
    }
  };

  return make_op_result({N, Cout, Ho, Wo}, std::move(out), {x, w, b}, backprop,
                        "conv_transpose2d");
}

Tensor maxpool2(const Tensor& x) {
  if (x.rank() != 4) throw ValueError("maxpool2: expected NCHW tensor");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw ValueError("maxpool2: dims must be even, got " + shape_str(x.shape()));
  }
  const int Ho = H / 2, Wo = W / 2;
  std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
  // argmax offsets, row-major within the 2x2 window; ties keep the first
  auto arg = std::make_shared<std::vector<std::uint8_t>>(out.size());
  const double* xd = x.data().data();
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = xd + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.data() + static_cast<std::size_t>(nc) * Ho * Wo;
    std::uint8_t* am = arg->data() + static_cast<std::size_t>(nc) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        const int base = 2 * oy * W + 2 * ox;
        double best = src[base];
        std::uint8_t bi = 0;
        const int offs[4] = {0, 1, W, W + 1};
        for (std::uint8_t k = 1; k < 4; ++k) {
          if (src[base + offs[k]] > best) {
            best = src[base + offs[k]];
            bi = k;
          }
        }
        dst[oy * Wo + ox] = best;
        am[oy * Wo + ox] = bi;
      }
    }
  }
  return make_op_result(
      {N, C, Ho, Wo}, std::move(out), {x},
      [arg, H, W, Ho, Wo](TensorNode& n) {
        auto& g = pgrad(n, 0);
        const int NC = n.shape[0] * n.shape[1];
        const int offs[4] = {0, 1, W, W + 1};
        for (int nc = 0; nc < NC; ++nc) {
          const double* grow = n.grad.data() + static_cast<std::size_t>(nc) * Ho * Wo;
          const std::uint8_t* am = arg->data() + static_cast<std::size_t>(nc) * Ho * Wo;
          double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
          for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
              dst[2 * oy * W + 2 * ox + offs[am[oy * Wo + ox]]] += grow[oy * Wo + ox];
            }
          }
        }
      },
      "maxpool2");
}

Tensor bilinear_up2(const Tensor& x) {
  if (x.rank() != 4) throw ValueError("bilinear_up2: expected NCHW tensor");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = 2 * H, Wo = 2 * W;

  // src = (dst + 0.5)/2 - 0.5; edges replicate
  auto make_axis = [](int out_n, int in_n, std::vector<int>& i0, std::vector<int>& i1,
                      std::vector<double>& f) {
    i0.resize(out_n);
    i1.resize(out_n);
    f.resize(out_n);
    for (int o = 0; o < out_n; ++o) {
      const double s = (o + 0.5) * 0.5 - 0.5;
      const double fl = std::floor(s);
      f[o] = s - fl;
      const int base = static_cast<int>(fl);
      i0[o] = std::min(in_n - 1, std::max(0, base));
      i1[o] = std::min(in_n - 1, std::max(0, base + 1));
    }
  };
  auto ax = std::make_shared<std::array<std::vector<int>, 4>>();
  auto fw = std::make_shared<std::array<std::vector<double>, 2>>();
  make_axis(Ho, H, (*ax)[0], (*ax)[1], (*fw)[0]);
  make_axis(Wo, W, (*ax)[2], (*ax)[3], (*fw)[1]);

  std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
  const double* xd = x.data().data();
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = xd + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.data() + static_cast<std::size_t>(nc) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      const int y0 = (*ax)[0][oy], y1 = (*ax)[1][oy];
      const double fy = (*fw)[0][oy];
      for (int ox = 0; ox < Wo; ++ox) {
        const int x0 = (*ax)[2][ox], x1 = (*ax)[3][ox];
        const double fx = (*fw)[1][ox];
        dst[oy * Wo + ox] = (1.0 - fy) * ((1.0 - fx) * src[y0 * W + x0] + fx * src[y0 * W + x1]) +
                            fy * ((1.0 - fx) * src[y1 * W + x0] + fx * src[y1 * W + x1]);
      }
    }
  }
  return make_op_result(
      {N, C, Ho, Wo}, std::move(out), {x},
      [ax, fw, H, W, Ho, Wo](TensorNode& n) {
        auto& g = pgrad(n, 0);
        const int NC = n.shape[0] * n.shape[1];
        for (int nc = 0; nc < NC; ++nc) {
          const double* grow = n.grad.data() + static_cast<std::size_t>(nc) * Ho * Wo;
          double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
          for (int oy = 0; oy < Ho; ++oy) {
            const int y0 = (*ax)[0][oy], y1 = (*ax)[1][oy];
            const double fy = (*fw)[0][oy];
            for (int ox = 0; ox < Wo; ++ox) {
              const int x0 = (*ax)[2][ox], x1 = (*ax)[3][ox];
              const double fx = (*fw)[1][ox];
              const double gv = grow[oy * Wo + ox];
              dst[y0 * W + x0] += gv * (1.0 - fy) * (1.0 - fx);
              dst[y0 * W + x1] += gv * (1.0 - fy) * fx;
              dst[y1 * W + x0] += gv * fy * (1.0 - fx);
              dst[y1 * W + x1] += gv * fy * fx;
            }
          }
        }
      },
      "bilinear_up2");
}

}  // namespace addl
