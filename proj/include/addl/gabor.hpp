#ifndef ADDL_GABOR_HPP_
#define ADDL_GABOR_HPP_

#include <array>
#include <vector>

#include "addl/image.hpp"
#include "addl/tensor.hpp"

namespace addl {
namespace gabor {

// Channel order of every 5-plane parameter map tensor (1, 5, h, w).
enum Channel : int { kWavelength = 0, kOrientation, kPhase, kSigma, kAspect };
constexpr int kNumParams = 5;

// Canonical per-channel ranges.  Orientation is pi-periodic and phase
// 2pi-periodic; maps produced by the networks always stay inside these.
extern const std::array<double, kNumParams> kParamLo;
extern const std::array<double, kNumParams> kParamHi;

struct GaborParams {
  double wavelength;   // sinusoid wavelength in pixels, [2, 16]
  double orientation;  // radians, canonical [0, pi)
  double phase;        // radians, canonical [-pi, pi)
  double sigma;        // Gaussian envelope std in pixels, [0.5, 4]
  double aspect;       // ellipticity, (0, 1]
};

// Gaussian envelope modulated by a sinusoidal plane wave, evaluated at the
// spatial offset (x, y).  Wavelength/sigma/aspect are validated strictly;
// the two angles are periodic, so any finite value is accepted and folded
// into the canonical ranges (orientation by pi with a phase negation, which
// keeps G(theta + pi, psi) == G(theta, -psi) bit-exact).
double gabor_value(double x, double y, const GaborParams& p);

struct Kernel {
  int size = 0;
  std::vector<double> taps;  // size x size, row-major; sums to 1

  // Input top-left row/col of the window for output pixel coordinate c.
  int anchor(int c) const { return 2 * c - size / 2 + 1; }
  double tap(int a, int b) const { return taps[static_cast<std::size_t>(a) * size + b]; }
};

// Samples the filter on a size x size half-integer lattice centered on the
// output site and normalizes the taps to unit sum.  If the raw sum magnitude
// falls below 1e-6 the normalized Gaussian envelope is used instead (phase
// treated as 0).  `size` must be even.
Kernel synth_kernel(const GaborParams& p, int size = 6);

// Validates a (1, 5, h, w) parameter map tensor against the canonical ranges.
void validate_maps(const Tensor& maps);

GaborParams params_at(const Tensor& maps, int y, int x);

// Spatially varying factor-2 downsampling: each output pixel is the dot
// product of its synthesized kernel with the reflect-padded input window,
// clamped to [0, 1].  Differentiable with respect to both the image and the
// five parameter planes.
Tensor gabor_downsample(const Tensor& img, const Tensor& maps, int kernel_size = 6);

// Plane-level convenience wrapper over gabor_downsample (no gradients).
ImagePlane downsample(const ImagePlane& img, const Tensor& maps, int kernel_size = 6);

}  // namespace gabor
}  // namespace addl

#endif  // ADDL_GABOR_HPP_
