#ifndef ADDL_TRAINING_HPP_
#define ADDL_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "addl/adam.hpp"
#include "addl/container.hpp"
#include "addl/image.hpp"
#include "addl/nets.hpp"

namespace addl {

struct TrainConfig {
  int patch = 64;
  int batch = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lr_initial = 1e-4;
  double lr_decay = 0.5;
  std::int64_t lr_decay_interval = 0;  // 0 -> max(500, steps/10)
  double lr_floor = 1.25e-5;
  int quality_lo = 10;
  int quality_hi = 90;
  int stage = 1;
  std::int64_t steps = 300;
  std::uint64_t seed = 1;
  int eval_interval = 50;
  int heldout_images = 8;
  std::string corpus_dir;  // empty -> synthetic corpus

  LrSchedule schedule() const;
};

// Seeded synthetic grayscale corpus: oriented sinusoidal gratings, Gaussian
// filtered noise, and smoothed step edges; PGM crops are mixed in when a
// directory is supplied.
class ToyCorpus {
 public:
  ToyCorpus(std::uint64_t seed, int image_size, int count, const std::string& dir = "");

  const std::vector<ImagePlane>& images() const { return images_; }
  ImagePlane random_patch(Rng& rng, int patch) const;

  // Deterministic held-out grating/edge set, disjoint seed stream.
  static std::vector<ImagePlane> heldout_set(std::uint64_t seed, int count, int size);

 private:
  std::vector<ImagePlane> images_;
};

// Uniform integer quality draw over [lo, hi].
int sample_quality(Rng& rng, int lo = 10, int hi = 90);

struct TrainLogRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double heldout_psnr = 0.0;  // metric of the most recent evaluation
};

using TrainLogFn = std::function<void(const TrainLogRow&)>;

// Stage 1: joint downsampling-estimator + upsampler training through the
// differentiable codec proxy, no side-information path.
void stage1_train(ModelWeights& weights, const TrainConfig& cfg, TrainLogFn log = nullptr);

// Stage 2: trains the prediction net against the frozen stage-1 estimator;
// inputs go through the real base codec.
void stage2_train(ModelWeights& weights, const TrainConfig& cfg, TrainLogFn log = nullptr);

// Stage 3: fine-tunes the upsampler with parameters reconstructed through the
// full quantize/dequantize path (straight-through gradients).
void stage3_train(ModelWeights& weights, const TrainConfig& cfg, TrainLogFn log = nullptr);

// Mean held-out L1 of the stage-1 path (downsample + codec proxy + upsample)
// at a fixed quality; the stage-1 progress metric.
double heldout_stage1_l1(const ModelWeights& weights, const std::vector<ImagePlane>& heldout,
                         int quality);

// Mean held-out prediction error (wrapped L1 over the five channels).
double heldout_prediction_error(const ModelWeights& weights,
                                const std::vector<ImagePlane>& heldout, int quality);
// Same error for the constant mid-range predictor baseline.
double heldout_midpoint_error(const ModelWeights& weights,
                              const std::vector<ImagePlane>& heldout, int quality);

// Mean held-out PSNR of the deployed encode/decode path.
double heldout_pipeline_psnr(const ModelWeights& weights, const std::vector<ImagePlane>& heldout,
                             int quality, CodingMode mode = CodingMode::kFull);

}  // namespace addl

#endif  // ADDL_TRAINING_HPP_
