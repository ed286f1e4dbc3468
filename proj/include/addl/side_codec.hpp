#ifndef ADDL_SIDE_CODEC_HPP_
#define ADDL_SIDE_CODEC_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "addl/gabor.hpp"
#include "addl/tensor.hpp"

namespace addl {

// Uniform per-channel quantizer for parameter-map residues.  Steps are
// transmitted as u16 codes in units of (channel range)/65535, so encoder and
// decoder reconstruct exactly the same lattice.
struct QuantizerSpec {
  std::array<std::uint16_t, gabor::kNumParams> step_codes;
  double scale = 1.0;  // global multiplier chosen by rate control

  static QuantizerSpec defaults();                // 1/64 of each range
  static QuantizerSpec scaled(double s);          // defaults scaled by s
  double step(int channel) const;                 // lattice step in param units
};

// Quantized residue planes plus their entropy-coded payload.
struct ResidueCode {
  std::vector<std::int32_t> indices;  // 5 * h * w, channel-major
  int height = 0;
  int width = 0;
  QuantizerSpec spec{};
  std::vector<std::uint8_t> payload;
  bool budget_exceeded = false;
};

// Orientation residues are folded into (-pi/2, pi/2] before quantization
// (orientation is pi-periodic); other channels quantize the plain difference
// round-half-away-from-zero.
ResidueCode quantize_residue(const Tensor& maps, const Tensor& predicted,
                             const QuantizerSpec& spec);

// prediction + dequantized residues, clamped back into the canonical ranges
// (orientation wraps modulo pi instead of clamping).
Tensor reconstruct_params(const Tensor& predicted, const ResidueCode& code);

std::vector<std::uint8_t> entropy_encode_residues(const ResidueCode& code);
// Needs the plane dims and spec (carried by the side payload wrapper).
std::vector<std::int32_t> entropy_decode_residues(const std::vector<std::uint8_t>& bytes,
                                                  int height, int width);

// Binary search on the global step scale (12 iterations over [2^-6, 2^6])
// for the smallest scale whose payload stays within budget_ratio*base_bits.
// If even the coarsest lattice misses the budget, returns it with
// budget_exceeded set.  Asserts that measured bits never increase when the
// scale grows (the property the search relies on).
struct RateControlResult {
  QuantizerSpec spec;
  ResidueCode code;
};
RateControlResult rate_control(const Tensor& maps, const Tensor& predicted,
                               std::int64_t base_bits, double budget_ratio = 0.20);

}  // namespace addl

#endif  // ADDL_SIDE_CODEC_HPP_
