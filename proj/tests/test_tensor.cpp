#include <doctest.h>

#include <cmath>
#include <cstring>

#include "addl/adam.hpp"
#include "addl/checkpoint.hpp"
#include "addl/common.hpp"
#include "addl/gradcheck.hpp"
#include "addl/tensor.hpp"

using namespace addl;

namespace {

Tensor rnd(Rng& rng, const Shape& s, double lo = -1.0, double hi = 1.0,
           bool requires_grad = false) {
  std::vector<double> v(shape_numel(s));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_data(s, std::move(v), requires_grad);
}

// Direct five-nested-loop convolution, zero padding.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                                int pad) {
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), kH = w.dim(2), kW = w.dim(3);
  const int Ho = (H + 2 * pad - kH) / stride + 1;
  const int Wo = (W + 2 * pad - kW) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(N) * Cout * Ho * Wo);
  for (int n = 0; n < N; ++n) {
    for (int oc = 0; oc < Cout; ++oc) {
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = b.data()[static_cast<std::size_t>(oc)];
          for (int ic = 0; ic < Cin; ++ic) {
            for (int ky = 0; ky < kH; ++ky) {
              for (int kx = 0; kx < kW; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += w.data()[((static_cast<std::size_t>(oc) * Cin + ic) * kH + ky) * kW + kx] *
                       x.data()[((static_cast<std::size_t>(n) * Cin + ic) * H + iy) * W + ix];
              }
            }
          }
          out[((static_cast<std::size_t>(n) * Cout + oc) * Ho + oy) * Wo + ox] = acc;
        }
      }
    }
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST_CASE("conv2d ones kernel sums the window") {
  const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  const Tensor b = Tensor::zeros({1});
  const Tensor y = conv2d(x, w, b, 1, 0);
  CHECK(y.size() == 1);
  CHECK(y.data()[0] == doctest::Approx(9.0).epsilon(0));
}

TEST_CASE("conv2d zero weights give constant bias") {
  Rng rng(3);
  const Tensor x = rnd(rng, {1, 2, 6, 6});
  const Tensor w = Tensor::zeros({4, 2, 3, 3});
  const Tensor b = Tensor::full({4}, 0.37);
  const Tensor y = conv2d(x, w, b, 1, 1);
  for (double v : y.data()) CHECK(v == 0.37);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Rng rng(17);
  const Tensor x = rnd(rng, {1, 2, 5, 5});
  const Tensor w = rnd(rng, {3, 2, 3, 3});
  const Tensor b = rnd(rng, {3});
  for (const auto& [stride, pad] : {std::pair{1, 0}, std::pair{1, 1}, std::pair{2, 1}}) {
    if ((5 + 2 * pad - 3) % stride != 0) continue;
    const Tensor y = conv2d(x, w, b, stride, pad);
    const std::vector<double> expect = conv_oracle(x, w, b, stride, pad);
    REQUIRE(y.data().size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d rejects inexact output size and bad shapes") {
  Rng rng(5);
  const Tensor x = rnd(rng, {1, 2, 5, 5});
  const Tensor w = rnd(rng, {3, 2, 2, 2});
  const Tensor b = rnd(rng, {3});
  CHECK_THROWS_AS(conv2d(x, w, b, 2, 0), ValueError);  // (5-2)/2 not integral
  const Tensor wrong_c = rnd(rng, {3, 4, 3, 3});
  CHECK_THROWS_AS(conv2d(x, wrong_c, b, 1, 1), ValueError);
}

TEST_CASE("transposed conv is the adjoint of the stride-2 conv") {
  Rng rng(23);
  for (const auto& [k, pad] : {std::pair{2, 0}, std::pair{4, 1}}) {
    const Tensor x = rnd(rng, {1, 3, 8, 8});   // conv input (2h)
    const Tensor y = rnd(rng, {1, 2, 4, 4});   // conv output (h)
    const Tensor w = rnd(rng, {2, 3, k, k});   // conv layout (outC, inC, k, k)
    const Tensor zero_b2 = Tensor::zeros({2});
    const Tensor zero_b3 = Tensor::zeros({3});
    const Tensor cx = conv2d(x, w, zero_b2, 2, pad);
    // the transposed layout (inC=2, outC=3, k, k) indexes the same buffer:
    // conv reads w[oc][ic], the adjoint reads w[ic'][oc'] with ic'=oc, oc'=ic
    const Tensor wt_t = Tensor::from_data({2, 3, k, k}, w.data());
    const Tensor ty = conv_transpose2d(y, wt_t, zero_b3, pad);
    const double lhs = dot(cx.data(), y.data());
    const double rhs = dot(x.data(), ty.data());
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("transposed conv zero input yields bias") {
  const Tensor x = Tensor::zeros({1, 2, 3, 3});
  Rng rng(9);
  const Tensor w = rnd(rng, {2, 3, 2, 2});
  const Tensor b = Tensor::from_data({3}, {0.1, -0.2, 0.3});
  const Tensor y = conv_transpose2d(x, w, b, 0);
  CHECK(y.dim(2) == 6);
  CHECK(y.dim(3) == 6);
  const std::size_t plane = 36;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      CHECK(y.data()[c * plane + i] == b.data()[static_cast<std::size_t>(c)]);
    }
  }
}

TEST_CASE("transposed conv 1x1 kernel interleaves zeros") {
  const Tensor x = Tensor::from_data({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  const Tensor w = Tensor::full({1, 1, 1, 1}, 0.5);
  const Tensor b = Tensor::zeros({1});
  const Tensor y = conv_transpose2d(x, w, b, 0);
  REQUIRE(y.dim(2) == 4);
  const std::vector<double> expect = {0.5, 0, 1.0, 0, 0, 0, 0, 0, 1.5, 0, 2.0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y.data()[i] == expect[i]);
}

TEST_CASE("maxpool2 basics and oracle") {
  const Tensor c = Tensor::full({1, 1, 4, 4}, 0.25);
  for (double v : maxpool2(c).data()) CHECK(v == 0.25);

  const Tensor t = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(maxpool2(t).data()[0] == 4);

  Rng rng(31);
  const Tensor x = rnd(rng, {2, 3, 8, 6});
  const Tensor y = maxpool2(x);
  const int H = 8, W = 6;
  for (int nc = 0; nc < 6; ++nc) {
    for (int oy = 0; oy < 4; ++oy) {
      for (int ox = 0; ox < 3; ++ox) {
        double best = -1e300;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            best = std::max(best,
                            x.data()[(static_cast<std::size_t>(nc) * H + 2 * oy + dy) * W +
                                     2 * ox + dx]);
          }
        }
        CHECK(y.data()[(static_cast<std::size_t>(nc) * 4 + oy) * 3 + ox] == best);
      }
    }
  }
}

TEST_CASE("maxpool2 tie routes gradient to the first window slot") {
  Tensor x = Tensor::full({1, 1, 2, 2}, 0.5, true);
  Tensor y = maxpool2(x);
  dot_sum(y, Tensor::full({1, 1, 1, 1}, 1.0)).backward();
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 0.0);
  CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("bilinear_up2 reproduces constants and ramps") {
  const Tensor c = Tensor::full({1, 1, 3, 5}, 0.7);
  for (double v : bilinear_up2(c).data()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));

  // horizontal ramp: interior output columns follow the same slope
  std::vector<double> ramp(8);
  for (int i = 0; i < 8; ++i) ramp[static_cast<std::size_t>(i)] = i;
  const Tensor r = Tensor::from_data({1, 1, 1, 8}, ramp);
  const Tensor u = bilinear_up2(r);
  for (int o = 2; o < 14; ++o) {
    const double src = (o + 0.5) * 0.5 - 0.5;
    CHECK(u.data()[static_cast<std::size_t>(o)] == doctest::Approx(src).epsilon(1e-12));
  }
}

TEST_CASE("bilinear_up2 matches closed-form interpolation") {
  Rng rng(41);
  const Tensor x = rnd(rng, {1, 2, 4, 5});
  const Tensor y = bilinear_up2(x);
  const int H = 4, W = 5;
  auto sample = [&](int c, double sy, double sx) {
    const auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
    const double fy = sy - y0, fx = sx - x0;
    auto at = [&](int yy, int xx) {
      return x.data()[(static_cast<std::size_t>(c) * H + clampi(yy, H)) * W + clampi(xx, W)];
    };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
           fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
  };
  for (int c = 0; c < 2; ++c) {
    for (int oy = 0; oy < 8; ++oy) {
      for (int ox = 0; ox < 10; ++ox) {
        const double expect = sample(c, (oy + 0.5) * 0.5 - 0.5, (ox + 0.5) * 0.5 - 0.5);
        CHECK(y.data()[(static_cast<std::size_t>(c) * 8 + oy) * 10 + ox] ==
              doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("concat and slice shape checks") {
  Rng rng(51);
  const Tensor a = rnd(rng, {1, 2, 3, 3});
  const Tensor b = rnd(rng, {1, 3, 3, 3});
  const Tensor c = concat_channels(a, b);
  CHECK(c.shape() == Shape{1, 5, 3, 3});
  CHECK_THROWS_AS(concat_channels(a, rnd(rng, {1, 2, 4, 3})), ValueError);
  const Tensor s = slice_channels(c, 2, 5);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(s.data()[i] == b.data()[i]);
}

TEST_CASE("relu output is nonnegative") {
  Rng rng(61);
  const Tensor x = rnd(rng, {4, 4});
  for (double v : relu(x).data()) CHECK(v >= 0.0);
}

TEST_CASE("l1 loss value and gradient") {
  Rng rng(71);
  const Tensor x = rnd(rng, {2, 5});
  CHECK(l1_loss(x, x).item() == 0.0);

  Tensor pred = Tensor::from_data({4}, {1.0, -2.0, 0.5, 0.5}, true);
  const Tensor target = Tensor::from_data({4}, {0.0, 0.0, 1.5, 0.5});
  l1_loss(pred, target).backward();
  CHECK(pred.grad()[0] == 0.25);   // sign(+1)/4
  CHECK(pred.grad()[1] == -0.25);  // sign(-2)/4
  CHECK(pred.grad()[2] == -0.25);
  CHECK(pred.grad()[3] == 0.0);    // tie -> 0
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  p.zero_grad();
  AdamState adam(LrSchedule{1e-4, 0.5, 1000, 1.25e-5});
  adam.step({p});
  CHECK(p.data()[0] == 1.0);
  CHECK(p.data()[1] == -2.0);
  CHECK(p.data()[2] == 0.5);
}

TEST_CASE("adam single step with unit gradient moves by about lr") {
  Tensor p = Tensor::from_data({1}, {1.0}, true);
  p.zero_grad();
  {
    Tensor t = p;
    t.node()->grad[0] = 1.0;
  }
  AdamState adam(LrSchedule{1e-4, 0.5, 1000, 1.25e-5});
  adam.step({p});
  // mhat = 1, vhat = 1 -> update = lr / (1 + eps)
  CHECK(p.data()[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-9));
}

TEST_CASE("learning rate schedule halves per interval down to the floor") {
  LrSchedule s{1e-4, 0.5, 100, 1.25e-5};
  CHECK(s.rate_at(0) == 1e-4);
  CHECK(s.rate_at(99) == 1e-4);
  CHECK(s.rate_at(100) == 5e-5);
  CHECK(s.rate_at(250) == 2.5e-5);
  CHECK(s.rate_at(5000) == 1.25e-5);  // floor
}

TEST_CASE("gradient checks for core ops") {
  Rng rng(81);
  const auto conv_op = [](const std::vector<Tensor>& in) {
    return conv2d(in[0], in[1], in[2], 1, 1);
  };
  const GradCheckReport conv_rep = grad_check(
      conv_op, {rnd(rng, {1, 2, 5, 5}), rnd(rng, {3, 2, 3, 3}), rnd(rng, {3})}, 1e-5, 1e-4, 7);
  CHECK(conv_rep.passed);

  // relu away from the kink
  std::vector<double> v(12);
  for (double& x : v) {
    do {
      x = rng.uniform(-1, 1);
    } while (std::abs(x) < 0.05);
  }
  const GradCheckReport relu_rep = grad_check(
      [](const std::vector<Tensor>& in) { return relu(in[0]); },
      {Tensor::from_data({12}, v)}, 1e-5, 1e-4, 9);
  CHECK(relu_rep.passed);

  // l1 away from ties
  const GradCheckReport l1_rep = grad_check(
      [](const std::vector<Tensor>& in) { return l1_loss(in[0], in[1]); },
      {rnd(rng, {6}, 0.5, 1.0), rnd(rng, {6}, -1.0, -0.5)}, 1e-5, 1e-4, 11);
  CHECK(l1_rep.passed);
}

TEST_CASE("determinism: same graph twice gives identical bytes") {
  auto run = [] {
    Rng rng(1234);
    const Tensor x = rnd(rng, {1, 2, 8, 8});
    const Tensor w1 = rnd(rng, {4, 2, 3, 3});
    const Tensor b1 = rnd(rng, {4});
    const Tensor w2 = rnd(rng, {1, 4, 3, 3});
    const Tensor b2 = rnd(rng, {1});
    return conv2d(relu(conv2d(x, w1, b1, 1, 1)), w2, b2, 1, 1);
  };
  const Tensor a = run();
  const Tensor b = run();
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("checkpoint round trip is bit exact and CRC failures are caught") {
  Rng rng(91);
  std::vector<NamedParam> params;
  params.push_back({"layer0/w", rnd(rng, {3, 2, 3, 3})});
  params.push_back({"layer0/b", rnd(rng, {3})});
  params.push_back({"deep/nested/name", rnd(rng, {7})});

  const std::vector<std::uint8_t> bytes = serialize_checkpoint(params);
  const std::vector<NamedParam> back = parse_checkpoint(bytes);
  REQUIRE(back.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(back[i].name == params[i].name);
    CHECK(back[i].tensor.shape() == params[i].tensor.shape());
    CHECK(std::memcmp(back[i].tensor.data().data(), params[i].tensor.data().data(),
                      params[i].tensor.size() * sizeof(double)) == 0);
  }
  // round trip of the serialization itself
  CHECK(serialize_checkpoint(back) == bytes);

  std::vector<std::uint8_t> corrupt = bytes;
  corrupt[10] ^= 0x40;
  CHECK_THROWS_AS(parse_checkpoint(corrupt), FormatError);
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 7);
  CHECK_THROWS_AS(parse_checkpoint(truncated), FormatError);
}

TEST_CASE("non-finite values are rejected at op boundaries") {
  CHECK_THROWS_AS(Tensor::from_data({2}, {1.0, std::nan("")}), ValueError);
  const Tensor big = Tensor::full({2}, 1e308);
  CHECK_THROWS_AS(add(big, big), ValueError);  // overflow to inf
}
