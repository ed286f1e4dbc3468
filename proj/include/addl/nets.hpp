#ifndef ADDL_NETS_HPP_
#define ADDL_NETS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "addl/checkpoint.hpp"
#include "addl/tensor.hpp"

namespace addl {

// U-Net style parameter estimator: an input conv, `stages` encoder stages
// (max-pool + two 3x3 convs), a mirrored decoder with bilinear upsampling and
// skip concatenation, and a 5-channel output head.  `out_level` selects the
// resolution the decoder stops at (1 = half input, 0 = input resolution).
struct UNetConfig {
  int base_channels = 16;
  int stages = 2;
  int out_level = 1;

  int channels_at(int level) const;
  int pad_multiple() const { return 1 << (stages + 1); }
};

struct UNet {
  UNetConfig cfg;
  ConvLayer in_conv;
  std::vector<ConvLayer> enc;  // two per stage
  std::vector<ConvLayer> dec;  // two per decoder step
  ConvLayer out_conv;

  // Raw (unactivated) 5-channel output at the configured level; any input
  // size is handled by internal reflect padding and output cropping.
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  std::vector<Tensor> trainable() const;
};

// Squashes a raw 5-channel tensor into the canonical parameter ranges,
// channel c mapping to lo_c + (hi_c - lo_c) * sigmoid(raw).
Tensor param_activation(const Tensor& raw);

// Estimates per-pixel filter parameters from the full-resolution image;
// output maps are (1, 5, H/2, W/2) and always range-valid.
Tensor gabor_net_forward(const UNet& net, const Tensor& image);

// Predicts the same maps from the decoded base layer (input and output both
// at base resolution).
Tensor predict_params(const UNet& net, const Tensor& base_image);

// Spatially adaptive 1x1 convolution: two 1x1 convs turn the parameter maps
// into per-pixel modulation features that gate the kernel-window product.
struct GsacLayer {
  ConvLayer extract1;  // 5 -> hidden
  ConvLayer extract2;  // hidden -> in_c
  ConvLayer conv;      // in_c -> out_c

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  std::vector<Tensor> trainable() const;
};

// `unit_modulation` replaces the extracted features with ones, reducing the
// layer to a standard convolution bit-for-bit.
Tensor gsac_forward(const Tensor& x, const Tensor& params, const GsacLayer& layer,
                    bool unit_modulation = false);

struct UpsamplerConfig {
  int blocks = 4;
  int width = 16;
};

struct UpsamplerBlock {
  GsacLayer g1, g2;
  ConvLayer c1, c2;  // 3x3
};

// Residual reconstruction network: GSAC residual blocks at base resolution,
// a transposed-conv x2 stage, and a residual head on top of a bilinear skip.
struct Upsampler {
  UpsamplerConfig cfg;
  ConvLayer head;
  std::vector<UpsamplerBlock> blocks;
  ConvTransposeLayer up;
  ConvLayer out_conv;

  Tensor forward(const Tensor& base, const Tensor& params, bool unit_modulation = false) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  std::vector<Tensor> trainable() const;
};

struct ModelConfig {
  UNetConfig gabor{16, 2, 1};
  UNetConfig predict{8, 1, 0};
  UpsamplerConfig upsampler{4, 16};
};

// The full weight set; checkpoints carry the architecture as small config
// tensors so loading reconstructs matching networks.
struct ModelWeights {
  ModelConfig cfg;
  UNet gabor_net;
  UNet predict_net;
  Upsampler upsampler;

  static ModelWeights init(const ModelConfig& cfg, std::uint64_t seed);

  std::vector<NamedParam> named_params() const;
  void save(const std::string& path) const;
  static ModelWeights load(const std::string& path);

  std::uint64_t digest() const;
  std::uint64_t component_digest(const std::string& prefix) const;
};

// Seeded He-uniform (fan-in) initialization for a conv layer.
void init_conv(ConvLayer& layer, int out_c, int in_c, int k, int stride, int pad, Rng& rng,
               double bias_init = 0.0);

}  // namespace addl

#endif  // ADDL_NETS_HPP_
