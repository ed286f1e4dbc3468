#ifndef ADDL_BASE_CODEC_HPP_
#define ADDL_BASE_CODEC_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "addl/image.hpp"
#include "addl/tensor.hpp"

namespace addl {

// Internal lossy base-layer codec: reflect-pad to 8-multiples, level shift,
// 8x8 orthonormal DCT, quality-scaled uniform quantization (round half away
// from zero), DC DPCM in raster order, AC zigzag, adaptive binary range
// coding.  Bitstreams are deterministic; see FORMAT.md for the exact layout.

// Orthonormal 8x8 DCT-II of one block (row-major in/out); idct8 inverts it.
void dct8(const double in[64], double out[64]);
void idct8(const double in[64], double out[64]);

// Quality in [1, 100] -> per-coefficient steps.  q=50 is the base table;
// scale = 5000/q below 50, 200 - 2q at or above; entries clamp to [1, 255].
std::array<int, 64> quant_table(int quality);

std::vector<std::uint8_t> encode_base(const ImagePlane& img, int quality);
ImagePlane decode_base(const std::vector<std::uint8_t>& bytes);

// ---- training-time differentiable proxy -------------------------------------

// Same transform/quantize/dequantize path as encode_base followed by
// decode_base, but with the cubic rounding surrogate in place of hard
// rounding; forward values agree with the real codec to within the |t|^3
// bound per DCT coefficient.  Input (1,1,H,W) in [0,1].
Tensor simulate_base(const Tensor& img, int quality);

}  // namespace addl

#endif  // ADDL_BASE_CODEC_HPP_
