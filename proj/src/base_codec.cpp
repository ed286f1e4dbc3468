#include "addl/base_codec.hpp"

#include <algorithm>
#include <cmath>

#include "addl/common.hpp"
#include "addl/range_coder.hpp"
#include "dct_basis.hpp"

namespace addl {

namespace {

// Standard luminance base table (quality 50).
constexpr int kBaseTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

constexpr int kZigzag[64] = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,   //
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,  //
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,  //
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

// zigzag position -> frequency band for AC context selection
inline int ac_band(int zz) { return zz <= 2 ? 0 : zz <= 9 ? 1 : zz <= 20 ? 2 : 3; }

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

inline double round_half_away(double x) { return std::round(x); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  if (pos + 2 > b.size()) throw FormatError("base payload truncated", static_cast<std::int64_t>(pos));
  const std::uint16_t v = static_cast<std::uint16_t>(b[pos] | (b[pos + 1] << 8));
  pos += 2;
  return v;
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  if (pos + 4 > b.size()) throw FormatError("base payload truncated", static_cast<std::int64_t>(pos));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

// Reflect-pad [0,1] samples to 8-multiples and level shift to [-128, 127].
std::vector<double> padded_levels(const ImagePlane& img, int pw, int ph) {
  std::vector<double> v(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y) {
    const int sy = reflect_index(y, img.height);
    for (int x = 0; x < pw; ++x) {
      v[static_cast<std::size_t>(y) * pw + x] = img.at(sy, reflect_index(x, img.width)) * 255.0 - 128.0;
    }
  }
  return v;
}

struct AcModels {
  SignedIntModel band[4];
};

}  // namespace

void dct8(const double in[64], double out[64]) {
  const auto& A = detail::kDctBasis8;
  double tmp[64];
  for (int y = 0; y < 8; ++y) {
    for (int k = 0; k < 8; ++k) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += A[k][n] * in[y * 8 + n];
      tmp[y * 8 + k] = acc;
    }
  }
  for (int x = 0; x < 8; ++x) {
    for (int k = 0; k < 8; ++k) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += A[k][n] * tmp[n * 8 + x];
      out[k * 8 + x] = acc;
    }
  }
}

void idct8(const double in[64], double out[64]) {
  const auto& A = detail::kDctBasis8;
  double tmp[64];
  for (int y = 0; y < 8; ++y) {
    for (int n = 0; n < 8; ++n) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += A[k][n] * in[y * 8 + k];
      tmp[y * 8 + n] = acc;
    }
  }
  for (int x = 0; x < 8; ++x) {
    for (int n = 0; n < 8; ++n) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += A[k][n] * tmp[k * 8 + x];
      out[n * 8 + x] = acc;
    }
  }
}

std::array<int, 64> quant_table(int quality) {
  if (quality < 1 || quality > 100) throw ValueError("quality must be in [1,100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> t{};
  for (int i = 0; i < 64; ++i) {
    t[i] = std::clamp((kBaseTable[i] * scale + 50) / 100, 1, 255);
  }
  return t;
}

std::vector<std::uint8_t> encode_base(const ImagePlane& img, int quality) {
  img.validate();
  if (img.width < 8 || img.height < 8) throw ValueError("encode_base: image must be >= 8x8");
  const std::array<int, 64> steps = quant_table(quality);
  const int pw = (img.width + 7) / 8 * 8;
  const int ph = (img.height + 7) / 8 * 8;
  const std::vector<double> levels = padded_levels(img, pw, ph);

  RangeEncoder dc_enc, ac_enc;
  SignedIntModel dc_model;
  AcModels ac_models;

  double block[64], coeffs[64];
  int prev_dc = 0;
  for (int by = 0; by < ph; by += 8) {
    for (int bx = 0; bx < pw; bx += 8) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) block[y * 8 + x] = levels[static_cast<std::size_t>(by + y) * pw + bx + x];
      }
      dct8(block, coeffs);
      int q[64];
      for (int i = 0; i < 64; ++i) q[i] = static_cast<int>(round_half_away(coeffs[i] / steps[i]));
      encode_signed(dc_enc, dc_model, q[0] - prev_dc);
      prev_dc = q[0];
      for (int zz = 1; zz < 64; ++zz) {
        encode_signed(ac_enc, ac_models.band[ac_band(zz)], q[kZigzag[zz]]);
      }
    }
  }

  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(quality));
  put_u16(out, static_cast<std::uint16_t>(img.width));
  put_u16(out, static_cast<std::uint16_t>(img.height));
  const std::vector<std::uint8_t> dc_bytes = dc_enc.finish();
  const std::vector<std::uint8_t> ac_bytes = ac_enc.finish();
  put_u32(out, static_cast<std::uint32_t>(dc_bytes.size()));
  out.insert(out.end(), dc_bytes.begin(), dc_bytes.end());
  put_u32(out, static_cast<std::uint32_t>(ac_bytes.size()));
  out.insert(out.end(), ac_bytes.begin(), ac_bytes.end());
  return out;
}

ImagePlane decode_base(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 5) throw FormatError("base payload too short", 0);
  const int quality = bytes[pos++];
  const int w = get_u16(bytes, pos);
  const int h = get_u16(bytes, pos);
  if (quality < 1 || quality > 100) throw FormatError("base payload: bad quality", 0);
  if (w < 8 || h < 8) throw FormatError("base payload: bad dimensions", 1);
  const std::array<int, 64> steps = quant_table(quality);
  const int pw = (w + 7) / 8 * 8;
  const int ph = (h + 7) / 8 * 8;

  const std::uint32_t dc_len = get_u32(bytes, pos);
  if (pos + dc_len > bytes.size()) throw FormatError("base payload: DC stream overruns", static_cast<std::int64_t>(pos));
  const std::size_t dc_off = pos;
  pos += dc_len;
  const std::uint32_t ac_len = get_u32(bytes, pos);
  if (pos + ac_len > bytes.size()) throw FormatError("base payload: AC stream overruns", static_cast<std::int64_t>(pos));
  const std::size_t ac_off = pos;
  pos += ac_len;

  RangeDecoder dc_dec(bytes.data() + dc_off, dc_len);
  RangeDecoder ac_dec(bytes.data() + ac_off, ac_len);
  SignedIntModel dc_model;
  AcModels ac_models;

  std::vector<double> levels(static_cast<std::size_t>(pw) * ph);
  double coeffs[64], block[64];
  int prev_dc = 0;
  for (int by = 0; by < ph; by += 8) {
    for (int bx = 0; bx < pw; bx += 8) {
      int q[64] = {};
      prev_dc += decode_signed(dc_dec, dc_model);
      q[0] = prev_dc;
      for (int zz = 1; zz < 64; ++zz) {
        q[kZigzag[zz]] = decode_signed(ac_dec, ac_models.band[ac_band(zz)]);
      }
      for (int i = 0; i < 64; ++i) coeffs[i] = static_cast<double>(q[i]) * steps[i];
      idct8(coeffs, block);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          levels[static_cast<std::size_t>(by + y) * pw + bx + x] = block[y * 8 + x];
        }
      }
    }
  }

  ImagePlane img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = (levels[static_cast<std::size_t>(y) * pw + x] + 128.0) / 255.0;
      img.at(y, x) = std::min(1.0, std::max(0.0, v));
    }
  }
  return img;
}

Tensor simulate_base(const Tensor& img, int quality) {
  if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 1) {
    throw ValueError("simulate_base: expected (1,1,H,W)");
  }
  const int H = img.dim(2), W = img.dim(3);
  if (H < 8 || W < 8) throw ValueError("simulate_base: image must be >= 8x8");
  const std::array<int, 64> isteps = quant_table(quality);
  std::array<double, 64> steps{};
  for (int i = 0; i < 64; ++i) steps[i] = static_cast<double>(isteps[i]);

  const int ph = (H + 7) / 8 * 8;
  const int pw = (W + 7) / 8 * 8;
  Tensor x = img;
  if (ph != H || pw != W) x = reflect_pad2d(x, 0, pw - W, 0, ph - H);
  x = add_scalar(scale(x, 255.0), -128.0);
  x = block_dct8(x);
  x = div_table8(x, steps);
  x = differentiable_round(x);
  x = mul_table8(x, steps);
  x = block_idct8(x);
  x = scale(add_scalar(x, 128.0), 1.0 / 255.0);
  if (ph != H || pw != W) x = crop2d(x, 0, 0, H, W);
  return clamp01(x);
}

}  // namespace addl
