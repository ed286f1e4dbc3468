#ifndef ADDL_IMAGE_HPP_
#define ADDL_IMAGE_HPP_

#include <string>
#include <vector>

#include "addl/tensor.hpp"

namespace addl {

// Single-channel luminance raster, samples in [0, 1], row-major.
struct ImagePlane {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  ImagePlane() = default;
  ImagePlane(int w, int h, double fill = 0.0)
      : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int y, int x) { return samples[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return samples[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return samples.size(); }

  // Throws unless every sample is finite and inside [0, 1].
  void validate() const;

  Tensor to_tensor() const;  // (1, 1, H, W)
  static ImagePlane from_tensor(const Tensor& t);
};

// 8-bit binary PGM (P5, maxval 255); samples map to [0,1] via /255.
ImagePlane read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImagePlane& img);

// Separable cubic-convolution resampler (a = -0.5), reflected boundary,
// antialiased when shrinking.  Factor must be 2 or 1/2.
ImagePlane bicubic_resize(const ImagePlane& img, double factor);

double mse(const ImagePlane& a, const ImagePlane& b);
// 10*log10(1/mse) for [0,1] planes, capped at 99 dB.
double psnr(const ImagePlane& a, const ImagePlane& b);

// Reflect-pad to even dimensions (no-op when already even).
ImagePlane pad_to_even(const ImagePlane& img);
ImagePlane crop_plane(const ImagePlane& img, int w, int h);

}  // namespace addl

#endif  // ADDL_IMAGE_HPP_
