#ifndef ADDL_PIPELINE_HPP_
#define ADDL_PIPELINE_HPP_

#include <cstdint>
#include <string>

#include "addl/container.hpp"
#include "addl/image.hpp"
#include "addl/nets.hpp"
#include "addl/side_codec.hpp"

namespace addl {

// Full encoder: estimate per-pixel filter parameters, downsample, compress
// the base layer, locally decode it, predict the parameters from the decoded
// base (exactly as the receiver will), and transmit rate-controlled residues.
struct EncodeResult {
  AddlStream stream;
  Tensor params;            // I_G estimated from the source
  Tensor params_predicted;  // L(decoded base), shared with the receiver
  Tensor params_received;   // what the receiver will reconstruct and use
  ImagePlane base_decoded;  // local decode of the base payload
  bool budget_exceeded = false;
};

EncodeResult encode_detailed(const ImagePlane& image, int quality, const ModelWeights& weights,
                             double side_budget = 0.20, CodingMode mode = CodingMode::kFull);
AddlStream encode(const ImagePlane& image, int quality, const ModelWeights& weights,
                  double side_budget = 0.20, CodingMode mode = CodingMode::kFull);

struct DecodeResult {
  ImagePlane image;
  Tensor params_received;
  ImagePlane base_decoded;
};

// `skip_model_check` is for diagnostics (sync_check fault injection); normal
// decoding hard-errors on a weight digest mismatch.
DecodeResult decode_detailed(const AddlStream& stream, const ModelWeights& weights,
                             bool skip_model_check = false);
ImagePlane decode(const AddlStream& stream, const ModelWeights& weights);

// Verifies the encoder/decoder synchronization contract: the parameters the
// encoder assumed the receiver reconstructs must match what a decoder with
// `decoder_weights` actually reconstructs, bit for bit.
struct SyncReport {
  bool match = false;
  double max_abs_diff = 0.0;
  std::size_t values = 0;
};

SyncReport sync_check(const ImagePlane& image, int quality, const ModelWeights& encoder_weights,
                      const ModelWeights* decoder_weights = nullptr);

struct BppBreakdown {
  double total = 0.0;
  double base = 0.0;
  double side = 0.0;
  double header = 0.0;
};

// Bits per pixel of the original-resolution image, counting every byte of
// the serialized container.
BppBreakdown bpp(const AddlStream& stream, int width, int height);

}  // namespace addl

#endif  // ADDL_PIPELINE_HPP_
