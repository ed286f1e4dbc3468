#include "addl/gabor.hpp"

#include <cmath>
#include <memory>

#include "addl/common.hpp"

namespace addl {
namespace gabor {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFallbackSum = 1e-6;

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Folds the angles into canonical ranges.  `flip` reports whether the
// orientation fold negated the phase (gradients need the sign).
GaborParams canonicalize(const GaborParams& p, bool* flip = nullptr) {
  GaborParams c = p;
  if (!(std::isfinite(c.orientation) && std::isfinite(c.phase))) {
    throw ValueError("gabor: non-finite angle");
  }
  bool flipped = false;
  if (c.orientation < 0.0 || c.orientation >= 2.0 * kPi) {
    c.orientation -= 2.0 * kPi * std::floor(c.orientation / (2.0 * kPi));
  }
  if (c.orientation >= kPi) {
    c.orientation -= kPi;
    c.phase = -c.phase;
    flipped = true;
  }
  if (c.phase < -kPi || c.phase > kPi) {
    c.phase -= 2.0 * kPi * std::floor((c.phase + kPi) / (2.0 * kPi));
  }
  if (flip) *flip = flipped;
  return c;
}

void validate_magnitudes(const GaborParams& p) {
  if (!(p.wavelength >= kParamLo[kWavelength] && p.wavelength <= kParamHi[kWavelength])) {
    throw ValueError("gabor: wavelength out of range [2,16]");
  }
  if (!(p.sigma >= kParamLo[kSigma] && p.sigma <= kParamHi[kSigma])) {
    throw ValueError("gabor: sigma out of range [0.5,4]");
  }
  if (!(p.aspect > 0.0 && p.aspect <= kParamHi[kAspect])) {
    throw ValueError("gabor: aspect ratio out of range (0,1]");
  }
}

struct TapEval {
  double value;
  double d[kNumParams];  // partials wrt wavelength, orientation, phase, sigma, aspect
};

// Value (and, when requested, analytic partials) at offset (x, y) for
// canonical params.  `envelope_only` drops the sinusoid (fallback path),
// where the wavelength/phase partials vanish.
TapEval eval_tap(double x, double y, const GaborParams& p, bool with_grad, bool envelope_only) {
  const double c = std::cos(p.orientation), s = std::sin(p.orientation);
  const double xr = x * c + y * s;
  const double yr = -x * s + y * c;
  const double inv_s2 = 1.0 / (p.sigma * p.sigma);
  const double q = xr * xr + p.aspect * p.aspect * yr * yr;
  const double env = std::exp(-0.5 * q * inv_s2);

  TapEval t{};
  if (envelope_only) {
    t.value = env;
    if (with_grad) {
      t.d[kOrientation] = env * (-(xr * yr - p.aspect * p.aspect * yr * xr) * inv_s2);
      t.d[kSigma] = env * q * inv_s2 / p.sigma;
      t.d[kAspect] = -env * p.aspect * yr * yr * inv_s2;
    }
    return t;
  }
  const double arg = 2.0 * kPi * xr / p.wavelength + p.phase;
  const double ca = std::cos(arg);
  t.value = env * ca;
  if (with_grad) {
    const double sa = std::sin(arg);
    // d env / d orientation uses xr' = yr, yr' = -xr
    const double denv_dth = env * (-(xr * yr - p.aspect * p.aspect * yr * xr) * inv_s2);
    const double darg_dth = 2.0 * kPi * yr / p.wavelength;
    t.d[kWavelength] = env * sa * 2.0 * kPi * xr / (p.wavelength * p.wavelength);
    t.d[kOrientation] = denv_dth * ca - env * sa * darg_dth;
    t.d[kPhase] = -env * sa;
    t.d[kSigma] = env * ca * q * inv_s2 / p.sigma;
    t.d[kAspect] = -env * ca * p.aspect * yr * yr * inv_s2;
  }
  return t;
}

// Raw (unnormalized) taps for the whole lattice.  Switches to the Gaussian
// envelope when the oscillatory sum nearly cancels (|sum| < 1e-6).
struct RawKernel {
  std::vector<TapEval> taps;
  double sum = 0.0;
  bool fallback = false;
};

RawKernel raw_kernel(const GaborParams& p, int size, bool with_grad) {
  RawKernel rk;
  rk.taps.resize(static_cast<std::size_t>(size) * size);
  const double half = 0.5 * (size - 1);
  for (int a = 0; a < size; ++a) {
    for (int b = 0; b < size; ++b) {
      rk.taps[static_cast<std::size_t>(a) * size + b] =
          eval_tap(b - half, a - half, p, with_grad, false);
    }
  }
  for (const TapEval& t : rk.taps) rk.sum += t.value;
  if (std::abs(rk.sum) < kFallbackSum) {
    rk.fallback = true;
    rk.sum = 0.0;
    for (int a = 0; a < size; ++a) {
      for (int b = 0; b < size; ++b) {
        rk.taps[static_cast<std::size_t>(a) * size + b] =
            eval_tap(b - half, a - half, p, with_grad, true);
      }
    }
    for (const TapEval& t : rk.taps) rk.sum += t.value;
  }
  return rk;
}

}  // namespace

const std::array<double, kNumParams> kParamLo = {2.0, 0.0, -kPi, 0.5, 0.0};
const std::array<double, kNumParams> kParamHi = {16.0, kPi, kPi, 4.0, 1.0};

double gabor_value(double x, double y, const GaborParams& p) {
  validate_magnitudes(p);
  const GaborParams c = canonicalize(p);
  return eval_tap(x, y, c, false, false).value;
}

Kernel synth_kernel(const GaborParams& p, int size) {
  if (size < 2 || size % 2 != 0) throw ValueError("synth_kernel: size must be even and >= 2");
  validate_magnitudes(p);
  const GaborParams c = canonicalize(p);
  const RawKernel rk = raw_kernel(c, size, false);
  Kernel k;
  k.size = size;
  k.taps.resize(rk.taps.size());
  const double inv = 1.0 / rk.sum;
  for (std::size_t i = 0; i < rk.taps.size(); ++i) k.taps[i] = rk.taps[i].value * inv;
  return k;
}

void validate_maps(const Tensor& maps) {
  if (maps.rank() != 4 || maps.dim(0) != 1 || maps.dim(1) != kNumParams) {
    throw ValueError("parameter maps must be (1,5,h,w), got " + shape_str(maps.shape()));
  }
  const int h = maps.dim(2), w = maps.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const auto& v = maps.data();
  for (int ch = 0; ch < kNumParams; ++ch) {
    const double lo = kParamLo[ch], hi = kParamHi[ch];
    const bool open_lo = ch == kAspect;          // aspect is (0, 1]
    const bool open_hi = ch == kOrientation || ch == kPhase;  // [lo, hi)
    for (std::size_t i = 0; i < plane; ++i) {
      const double x = v[ch * plane + i];
      const bool ok = (open_lo ? x > lo : x >= lo) && (open_hi ? x < hi : x <= hi);
      if (!ok) {
        throw ValueError("parameter map channel " + std::to_string(ch) + " value out of range");
      }
    }
  }
}

GaborParams params_at(const Tensor& maps, int y, int x) {
  const int h = maps.dim(2), w = maps.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t i = static_cast<std::size_t>(y) * w + x;
  const auto& v = maps.data();
  return GaborParams{v[kWavelength * plane + i], v[kOrientation * plane + i],
                     v[kPhase * plane + i], v[kSigma * plane + i], v[kAspect * plane + i]};
}

namespace {

// Forward + backward for the raw (unclamped) spatially varying downsample.
Tensor gabor_downsample_raw(const Tensor& img, const Tensor& maps, int size) {
  if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 1) {
    throw ValueError("gabor_downsample: image must be (1,1,H,W)");
  }
  if (maps.rank() != 4 || maps.dim(0) != 1 || maps.dim(1) != kNumParams) {
    throw ValueError("gabor_downsample: maps must be (1,5,h,w)");
  }
  const int H = img.dim(2), W = img.dim(3);
  const int h = maps.dim(2), w = maps.dim(3);
  if (H != 2 * h || W != 2 * w) {
    throw ValueError("gabor_downsample: maps " + shape_str(maps.shape()) +
                     " do not halve image " + shape_str(img.shape()));
  }
  if (size < 2 || size % 2 != 0) throw ValueError("gabor_downsample: kernel size must be even");

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const auto& mv = maps.data();
  const double* xd = img.data().data();
  std::vector<double> out(plane);

  parallel_for(h, [&](int oy) {
    for (int ox = 0; ox < w; ++ox) {
      GaborParams p{mv[kWavelength * plane + oy * w + ox],
                    mv[kOrientation * plane + oy * w + ox], mv[kPhase * plane + oy * w + ox],
                    mv[kSigma * plane + oy * w + ox], mv[kAspect * plane + oy * w + ox]};
      const RawKernel rk = raw_kernel(p, size, false);
      const int top = 2 * oy - size / 2 + 1;
      const int left = 2 * ox - size / 2 + 1;
      double num = 0.0;
      for (int a = 0; a < size; ++a) {
        const int iy = reflect_index(top + a, H);
        for (int b = 0; b < size; ++b) {
          const int ix = reflect_index(left + b, W);
          num += rk.taps[static_cast<std::size_t>(a) * size + b].value *
                 xd[static_cast<std::size_t>(iy) * W + ix];
        }
      }
      out[static_cast<std::size_t>(oy) * w + ox] = num / rk.sum;
    }
  });

  auto backprop = [size, H, W, h, w, plane](TensorNode& node) {
    const double* go = node.grad.data();
    const double* xd = node.parents[0]->value.data();
    const auto& mv = node.parents[1]->value;
    const bool need_img = node.parents[0]->requires_grad;
    const bool need_maps = node.parents[1]->requires_grad;
    double* gx = nullptr;
    double* gm = nullptr;
    if (need_img) {
      node.parents[0]->ensure_grad();
      gx = node.parents[0]->grad.data();
    }
    if (need_maps) {
      node.parents[1]->ensure_grad();
      gm = node.parents[1]->grad.data();
    }
    for (int oy = 0; oy < h; ++oy) {
      for (int ox = 0; ox < w; ++ox) {
        const double g = go[static_cast<std::size_t>(oy) * w + ox];
        if (g == 0.0) continue;
        GaborParams p{mv[kWavelength * plane + oy * w + ox],
                      mv[kOrientation * plane + oy * w + ox], mv[kPhase * plane + oy * w + ox],
                      mv[kSigma * plane + oy * w + ox], mv[kAspect * plane + oy * w + ox]};
        const RawKernel rk = raw_kernel(p, size, true);
        const int top = 2 * oy - size / 2 + 1;
        const int left = 2 * ox - size / 2 + 1;
        double num = 0.0;
        double dnum[kNumParams] = {0, 0, 0, 0, 0};
        double dsum[kNumParams] = {0, 0, 0, 0, 0};
        for (int a = 0; a < size; ++a) {
          const int iy = reflect_index(top + a, H);
          for (int b = 0; b < size; ++b) {
            const int ix = reflect_index(left + b, W);
            const TapEval& t = rk.taps[static_cast<std::size_t>(a) * size + b];
            const double xv = xd[static_cast<std::size_t>(iy) * W + ix];
            num += t.value * xv;
            for (int c = 0; c < kNumParams; ++c) {
              dnum[c] += t.d[c] * xv;
              dsum[c] += t.d[c];
            }
          }
        }
        const double inv = 1.0 / rk.sum;
        const double y = num * inv;
        if (gm) {
          for (int c = 0; c < kNumParams; ++c) {
            gm[c * plane + static_cast<std::size_t>(oy) * w + ox] +=
                g * (dnum[c] - y * dsum[c]) * inv;
          }
        }
        if (gx) {
          for (int a = 0; a < size; ++a) {
            const int iy = reflect_index(top + a, H);
            for (int b = 0; b < size; ++b) {
              const int ix = reflect_index(left + b, W);
              gx[static_cast<std::size_t>(iy) * W + ix] +=
                  g * rk.taps[static_cast<std::size_t>(a) * size + b].value * inv;
            }
          }
        }
      }
    }
  };

  return make_op_result({1, 1, h, w}, std::move(out), {img, maps}, backprop,
                        "gabor_downsample");
}

}  // namespace

Tensor gabor_downsample(const Tensor& img, const Tensor& maps, int kernel_size) {
  return clamp01(gabor_downsample_raw(img, maps, kernel_size));
}

ImagePlane downsample(const ImagePlane& img, const Tensor& maps, int kernel_size) {
  if (img.width % 2 != 0 || img.height % 2 != 0) {
    throw ValueError("downsample: image dims must be even");
  }
  NoGradGuard ng;
  return ImagePlane::from_tensor(gabor_downsample(img.to_tensor(), maps, kernel_size));
}

}  // namespace gabor
}  // namespace addl
