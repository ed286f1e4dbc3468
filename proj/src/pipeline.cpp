#include "addl/pipeline.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "addl/base_codec.hpp"
#include "addl/common.hpp"
#include "addl/gabor.hpp"

namespace addl {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

constexpr std::uint8_t kSideFlagBudgetExceeded = 0x01;

std::vector<std::uint8_t> build_side_payload(const RateControlResult& rc) {
  std::vector<std::uint8_t> out;
  for (int c = 0; c < gabor::kNumParams; ++c) put_u16(out, rc.spec.step_codes[c]);
  out.push_back(rc.code.budget_exceeded ? kSideFlagBudgetExceeded : 0);
  put_u32(out, static_cast<std::uint32_t>(rc.code.payload.size()));
  out.insert(out.end(), rc.code.payload.begin(), rc.code.payload.end());
  return out;
}

struct SidePayload {
  QuantizerSpec spec;
  bool budget_exceeded = false;
  std::vector<std::uint8_t> coder_bytes;
};

SidePayload parse_side_payload(const std::vector<std::uint8_t>& b) {
  const std::size_t kFixed = 2 * gabor::kNumParams + 1 + 4;
  if (b.size() < kFixed) throw FormatError("side payload too short", static_cast<std::int64_t>(b.size()));
  SidePayload sp;
  std::size_t pos = 0;
  for (int c = 0; c < gabor::kNumParams; ++c) {
    sp.spec.step_codes[c] = static_cast<std::uint16_t>(b[pos] | (b[pos + 1] << 8));
    if (sp.spec.step_codes[c] == 0) throw FormatError("side payload: zero step code", static_cast<std::int64_t>(pos));
    pos += 2;
  }
  sp.spec.scale = static_cast<double>(sp.spec.step_codes[0]) /
                  static_cast<double>(QuantizerSpec::defaults().step_codes[0]);
  const std::uint8_t flags = b[pos++];
  if (flags & ~kSideFlagBudgetExceeded) {
    throw FormatError("side payload: unknown flags", static_cast<std::int64_t>(pos - 1));
  }
  sp.budget_exceeded = (flags & kSideFlagBudgetExceeded) != 0;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
  pos += 4;
  if (pos + len != b.size()) {
    throw FormatError("side payload: coder stream length mismatch", static_cast<std::int64_t>(pos));
  }
  sp.coder_bytes.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
  return sp;
}

Tensor zero_prediction(int h, int w) {
  return Tensor::zeros({1, gabor::kNumParams, h, w});
}

}  // namespace

EncodeResult encode_detailed(const ImagePlane& image, int quality, const ModelWeights& weights,
                             double side_budget, CodingMode mode) {
  image.validate();
  if (image.width < 16 || image.height < 16) {
    throw ValueError("encode: image must be at least 16x16");
  }
  if (side_budget < 0.0) throw ValueError("encode: negative side budget");
  NoGradGuard ng;

  const ImagePlane padded = pad_to_even(image);
  const Tensor x = padded.to_tensor();

  EncodeResult res;
  res.params = gabor_net_forward(weights.gabor_net, x);
  const ImagePlane base = gabor::downsample(padded, res.params);
  std::vector<std::uint8_t> base_payload = encode_base(base, quality);
  res.base_decoded = decode_base(base_payload);
  res.params_predicted = predict_params(weights.predict_net, res.base_decoded.to_tensor());

  AddlStream s;
  s.width = static_cast<std::uint32_t>(image.width);
  s.height = static_cast<std::uint32_t>(image.height);
  s.mode = mode;
  s.model_id = weights.digest();
  s.base_payload = std::move(base_payload);

  if (mode == CodingMode::kNoSideInfo) {
    res.params_received = res.params_predicted;
  } else {
    const Tensor prediction = mode == CodingMode::kNoPredictiveCoding
                                  ? zero_prediction(res.params.dim(2), res.params.dim(3))
                                  : res.params_predicted;
    const std::int64_t base_bits = static_cast<std::int64_t>(s.base_payload.size()) * 8;
    RateControlResult rc = rate_control(res.params, prediction, base_bits, side_budget);
    res.budget_exceeded = rc.code.budget_exceeded;
    res.params_received = reconstruct_params(prediction, rc.code);
    s.side_payload = build_side_payload(rc);
  }

  res.stream = std::move(s);
  return res;
}

AddlStream encode(const ImagePlane& image, int quality, const ModelWeights& weights,
                  double side_budget, CodingMode mode) {
  return encode_detailed(image, quality, weights, side_budget, mode).stream;
}

DecodeResult decode_detailed(const AddlStream& stream, const ModelWeights& weights,
                             bool skip_model_check) {
  if (stream.base_codec_id != 0) {
    throw FormatError("unsupported base codec id " + std::to_string(stream.base_codec_id));
  }
  if (!skip_model_check && stream.model_id != weights.digest()) {
    throw ModelMismatchError("stream was encoded with different weights (model id mismatch)");
  }
  NoGradGuard ng;

  DecodeResult res;
  res.base_decoded = decode_base(stream.base_payload);
  const int we = static_cast<int>(stream.width) + static_cast<int>(stream.width % 2);
  const int he = static_cast<int>(stream.height) + static_cast<int>(stream.height % 2);
  if (res.base_decoded.width != we / 2 || res.base_decoded.height != he / 2) {
    throw FormatError("base layer dims do not match container dims");
  }

  const Tensor base_t = res.base_decoded.to_tensor();
  const Tensor predicted = predict_params(weights.predict_net, base_t);

  if (stream.mode == CodingMode::kNoSideInfo) {
    if (!stream.side_payload.empty()) {
      throw FormatError("no-side stream carries a side payload");
    }
    res.params_received = predicted;
  } else {
    const SidePayload sp = parse_side_payload(stream.side_payload);
    ResidueCode code;
    code.height = res.base_decoded.height;
    code.width = res.base_decoded.width;
    code.spec = sp.spec;
    code.budget_exceeded = sp.budget_exceeded;
    code.indices = entropy_decode_residues(sp.coder_bytes, code.height, code.width);
    code.payload = sp.coder_bytes;
    const Tensor prediction = stream.mode == CodingMode::kNoPredictiveCoding
                                  ? zero_prediction(code.height, code.width)
                                  : predicted;
    res.params_received = reconstruct_params(prediction, code);
  }

  Tensor out = weights.upsampler.forward(base_t, res.params_received,
                                         stream.mode == CodingMode::kNoGsac);
  if (out.dim(2) != static_cast<int>(stream.height) || out.dim(3) != static_cast<int>(stream.width)) {
    out = crop2d(out, 0, 0, static_cast<int>(stream.height), static_cast<int>(stream.width));
  }
  res.image = ImagePlane::from_tensor(out);
  return res;
}

ImagePlane decode(const AddlStream& stream, const ModelWeights& weights) {
  return decode_detailed(stream, weights).image;
}

SyncReport sync_check(const ImagePlane& image, int quality, const ModelWeights& encoder_weights,
                      const ModelWeights* decoder_weights) {
  const ModelWeights& dec_w = decoder_weights ? *decoder_weights : encoder_weights;
  const EncodeResult enc = encode_detailed(image, quality, encoder_weights);
  const DecodeResult dec = decode_detailed(enc.stream, dec_w, /*skip_model_check=*/true);

  SyncReport rep;
  const auto& a = enc.params_received.data();
  const auto& b = dec.params_received.data();
  rep.values = a.size();
  if (a.size() != b.size()) {
    rep.match = false;
    rep.max_abs_diff = std::numeric_limits<double>::infinity();
    return rep;
  }
  rep.match = std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(a[i] - b[i]));
  }
  return rep;
}

BppBreakdown bpp(const AddlStream& stream, int width, int height) {
  if (width <= 0 || height <= 0) throw ValueError("bpp: bad dimensions");
  const double pixels = static_cast<double>(width) * height;
  BppBreakdown b;
  b.total = static_cast<double>(serialize_stream(stream).size()) * 8.0 / pixels;
  b.base = static_cast<double>(stream.base_payload.size()) * 8.0 / pixels;
  b.side = static_cast<double>(stream.side_payload.size()) * 8.0 / pixels;
  b.header = b.total - b.base - b.side;
  return b;
}

}  // namespace addl
