#include "addl/side_codec.hpp"

#include <algorithm>
#include <cmath>

#include "addl/common.hpp"
#include "addl/range_coder.hpp"

namespace addl {

namespace {

constexpr double kPi = 3.14159265358979323846;

double channel_range(int ch) { return gabor::kParamHi[ch] - gabor::kParamLo[ch]; }

// theta residues live on (-pi/2, pi/2]
inline double wrap_half_pi(double d) {
  d -= kPi * std::floor(d / kPi + 0.5);
  if (d <= -0.5 * kPi) d += kPi;
  return d;
}

inline double wrap_mod_pi(double v) {
  v -= kPi * std::floor(v / kPi);
  if (v >= kPi) v -= kPi;
  if (v < 0.0) v = 0.0;
  return v;
}

void check_maps_pair(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || a.dim(0) != 1 || a.dim(1) != gabor::kNumParams) {
    throw ValueError("side codec: maps must be (1,5,h,w)");
  }
  if (a.shape() != b.shape()) {
    throw ValueError("side codec: map shapes differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace

QuantizerSpec QuantizerSpec::defaults() {
  QuantizerSpec s;
  s.scale = 1.0;
  // 1/64 of each range, on the u16 fixed-point lattice
  for (int c = 0; c < gabor::kNumParams; ++c) {
    s.step_codes[c] = static_cast<std::uint16_t>(std::lround(65535.0 / 64.0));
  }
  return s;
}

QuantizerSpec QuantizerSpec::scaled(double s) {
  QuantizerSpec base = defaults();
  QuantizerSpec out;
  out.scale = s;
  for (int c = 0; c < gabor::kNumParams; ++c) {
    const double code = std::lround(static_cast<double>(base.step_codes[c]) * s);
    out.step_codes[c] = static_cast<std::uint16_t>(std::clamp(code, 1.0, 65535.0));
  }
  return out;
}

double QuantizerSpec::step(int channel) const {
  return static_cast<double>(step_codes[channel]) * channel_range(channel) / 65535.0;
}

ResidueCode quantize_residue(const Tensor& maps, const Tensor& predicted,
                             const QuantizerSpec& spec) {
  check_maps_pair(maps, predicted);
  const int h = maps.dim(2), w = maps.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  ResidueCode code;
  code.height = h;
  code.width = w;
  code.spec = spec;
  code.indices.resize(gabor::kNumParams * plane);
  const auto& mv = maps.data();
  const auto& pv = predicted.data();
  for (int c = 0; c < gabor::kNumParams; ++c) {
    const double step = spec.step(c);
    for (std::size_t i = 0; i < plane; ++i) {
      double r = mv[c * plane + i] - pv[c * plane + i];
      if (c == gabor::kOrientation) r = wrap_half_pi(r);
      code.indices[c * plane + i] = static_cast<std::int32_t>(std::round(r / step));
    }
  }
  code.payload = entropy_encode_residues(code);
  return code;
}

Tensor reconstruct_params(const Tensor& predicted, const ResidueCode& code) {
  if (predicted.dim(2) != code.height || predicted.dim(3) != code.width) {
    throw ValueError("reconstruct_params: dims mismatch");
  }
  const std::size_t plane = static_cast<std::size_t>(code.height) * code.width;
  std::vector<double> out(gabor::kNumParams * plane);
  const auto& pv = predicted.data();
  for (int c = 0; c < gabor::kNumParams; ++c) {
    const double step = code.spec.step(c);
    const double lo = gabor::kParamLo[c], hi = gabor::kParamHi[c];
    for (std::size_t i = 0; i < plane; ++i) {
      double v = pv[c * plane + i] + step * code.indices[c * plane + i];
      if (c == gabor::kOrientation) {
        v = wrap_mod_pi(v);
      } else {
        // keep strictly inside open endpoints (aspect > 0, phase < pi)
        v = std::min(hi, std::max(lo, v));
        if (c == gabor::kAspect && v <= 0.0) v = 1e-6;
        if (c == gabor::kPhase && v >= hi) v = std::nextafter(hi, lo);
      }
      out[c * plane + i] = v;
    }
  }
  return Tensor::from_data({1, gabor::kNumParams, code.height, code.width}, std::move(out));
}

std::vector<std::uint8_t> entropy_encode_residues(const ResidueCode& code) {
  const std::size_t plane = static_cast<std::size_t>(code.height) * code.width;
  RangeEncoder enc;
  std::vector<SignedIntModel> models(gabor::kNumParams);
  for (int c = 0; c < gabor::kNumParams; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      encode_signed(enc, models[c], code.indices[c * plane + i]);
    }
  }
  return enc.finish();
}

std::vector<std::int32_t> entropy_decode_residues(const std::vector<std::uint8_t>& bytes,
                                                  int height, int width) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  RangeDecoder dec(bytes.data(), bytes.size());
  std::vector<SignedIntModel> models(gabor::kNumParams);
  std::vector<std::int32_t> indices(gabor::kNumParams * plane);
  for (int c = 0; c < gabor::kNumParams; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      indices[c * plane + i] = decode_signed(dec, models[c]);
    }
  }
  return indices;
}

RateControlResult rate_control(const Tensor& maps, const Tensor& predicted,
                               std::int64_t base_bits, double budget_ratio) {
  check_maps_pair(maps, predicted);
  if (base_bits <= 0) throw ValueError("rate_control: base_bits must be positive");
  const double budget = budget_ratio * static_cast<double>(base_bits);

  std::vector<std::pair<double, std::int64_t>> measured;  // (log2 scale, bits)
  auto bits_at = [&](double log2s, ResidueCode* out) {
    const QuantizerSpec spec = QuantizerSpec::scaled(std::exp2(log2s));
    ResidueCode code = quantize_residue(maps, predicted, spec);
    const std::int64_t bits = static_cast<std::int64_t>(code.payload.size()) * 8;
    measured.emplace_back(log2s, bits);
    if (out) *out = std::move(code);
    return bits;
  };

  RateControlResult res;
  const double lo_exp = -6.0, hi_exp = 6.0;

  ResidueCode finest;
  if (bits_at(lo_exp, &finest) <= budget) {
    res.spec = finest.spec;
    res.code = std::move(finest);
    return res;
  }

  ResidueCode coarsest;
  const std::int64_t coarse_bits = bits_at(hi_exp, &coarsest);
  if (coarse_bits > budget) {
    coarsest.budget_exceeded = true;
    res.spec = coarsest.spec;
    res.code = std::move(coarsest);
    return res;
  }

  double a = lo_exp, b = hi_exp;
  ResidueCode best = std::move(coarsest);
  for (int it = 0; it < 12; ++it) {
    const double mid = 0.5 * (a + b);
    ResidueCode code;
    if (bits_at(mid, &code) <= budget) {
      b = mid;
      best = std::move(code);
    } else {
      a = mid;
    }
  }

  // Sanity: payload size must not grow with the step scale.
  std::sort(measured.begin(), measured.end());
  for (std::size_t i = 1; i < measured.size(); ++i) {
    if (measured[i].second > measured[i - 1].second) {
      throw ValueError("rate_control: side bits increased with coarser quantization");
    }
  }

  res.spec = best.spec;
  res.code = std::move(best);
  return res;
}

}  // namespace addl
