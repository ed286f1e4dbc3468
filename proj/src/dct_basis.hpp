#ifndef ADDL_SRC_DCT_BASIS_HPP_
#define ADDL_SRC_DCT_BASIS_HPP_

namespace addl {
namespace detail {

// Orthonormal DCT-II basis A[k][n] = c_k cos((2n+1) k pi / 16), correctly
// rounded doubles.  Hardcoded so quantized coefficients (and therefore
// bitstreams) do not depend on the platform's libm.
constexpr double kDctBasis8[8][8] = {
    {0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2,
     0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2},
    {0x1.f6297cff75cb0p-2, 0x1.a9b66290ea1a3p-2, 0x1.1c73b39ae68c8p-2, 0x1.8f8b83c69a60bp-4,
     -0x1.8f8b83c69a60bp-4, -0x1.1c73b39ae68c8p-2, -0x1.a9b66290ea1a3p-2, -0x1.f6297cff75cb0p-2},
    {0x1.d906bcf328d46p-2, 0x1.87de2a6aea963p-3, -0x1.87de2a6aea963p-3, -0x1.d906bcf328d46p-2,
     -0x1.d906bcf328d46p-2, -0x1.87de2a6aea963p-3, 0x1.87de2a6aea963p-3, 0x1.d906bcf328d46p-2},
    {0x1.a9b66290ea1a3p-2, -0x1.8f8b83c69a60bp-4, -0x1.f6297cff75cb0p-2, -0x1.1c73b39ae68c8p-2,
     0x1.1c73b39ae68c8p-2, 0x1.f6297cff75cb0p-2, 0x1.8f8b83c69a60bp-4, -0x1.a9b66290ea1a3p-2},
    {0x1.6a09e667f3bcdp-2, -0x1.6a09e667f3bcdp-2, -0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2,
     0x1.6a09e667f3bcdp-2, -0x1.6a09e667f3bcdp-2, -0x1.6a09e667f3bcdp-2, 0x1.6a09e667f3bcdp-2},
    {0x1.1c73b39ae68c8p-2, -0x1.f6297cff75cb0p-2, 0x1.8f8b83c69a60bp-4, 0x1.a9b66290ea1a3p-2,
     -0x1.a9b66290ea1a3p-2, -0x1.8f8b83c69a60bp-4, 0x1.f6297cff75cb0p-2, -0x1.1c73b39ae68c8p-2},
    {0x1.87de2a6aea963p-3, -0x1.d906bcf328d46p-2, 0x1.d906bcf328d46p-2, -0x1.87de2a6aea963p-3,
     -0x1.87de2a6aea963p-3, 0x1.d906bcf328d46p-2, -0x1.d906bcf328d46p-2, 0x1.87de2a6aea963p-3},
    {0x1.8f8b83c69a60bp-4, -0x1.1c73b39ae68c8p-2, 0x1.a9b66290ea1a3p-2, -0x1.f6297cff75cb0p-2,
     0x1.f6297cff75cb0p-2, -0x1.a9b66290ea1a3p-2, 0x1.1c73b39ae68c8p-2, -0x1.8f8b83c69a60bp-4},
};

}  // namespace detail
}  // namespace addl

#endif  // ADDL_SRC_DCT_BASIS_HPP_
