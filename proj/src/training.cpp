#include "addl/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "addl/base_codec.hpp"
#include "addl/common.hpp"
#include "addl/gabor.hpp"
#include "addl/pipeline.hpp"
#include "addl/side_codec.hpp"

namespace addl {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

ImagePlane make_grating(Rng& rng, int size) {
  const double wavelength = rng.uniform(4.0, 16.0);
  const double theta = rng.uniform(0.0, kPi);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double amp = rng.uniform(0.15, 0.45);
  const double c = std::cos(theta), s = std::sin(theta);
  ImagePlane img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double proj = x * c + y * s;
      img.at(y, x) = 0.5 + amp * std::cos(2.0 * kPi * proj / wavelength + phase);
    }
  }
  return img;
}

ImagePlane make_filtered_noise(Rng& rng, int size) {
  std::vector<double> noise(static_cast<std::size_t>(size) * size);
  for (double& v : noise) v = rng.next_double();
  const double sigma = rng.uniform(0.8, 2.5);
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ks = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    ks += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= ks;

  std::vector<double> tmp(noise.size()), blurred(noise.size());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               noise[static_cast<std::size_t>(y) * size + reflect_index(x + i, size)];
      }
      tmp[static_cast<std::size_t>(y) * size + x] = acc;
    }
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               tmp[static_cast<std::size_t>(reflect_index(y + i, size)) * size + x];
      }
      blurred[static_cast<std::size_t>(y) * size + x] = acc;
    }
  }
  double lo = blurred[0], hi = blurred[0];
  for (double v : blurred) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  ImagePlane img(size, size);
  for (std::size_t i = 0; i < blurred.size(); ++i) {
    img.samples[i] = 0.1 + 0.8 * (blurred[i] - lo) / span;
  }
  return img;
}

ImagePlane make_step_edge(Rng& rng, int size) {
  const double theta = rng.uniform(0.0, kPi);
  const double offset = rng.uniform(0.3, 0.7) * size;
  const double width = rng.uniform(0.6, 2.0);
  const double a = rng.uniform(0.1, 0.45);
  const double b = rng.uniform(0.55, 0.9);
  const double c = std::cos(theta), s = std::sin(theta);
  ImagePlane img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double d = (x * c + y * s - offset) / width;
      const double t = 0.5 * (1.0 + std::tanh(d));
      img.at(y, x) = a + (b - a) * t;
    }
  }
  return img;
}

std::vector<ImagePlane> load_dir_images(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") {
      files.push_back(e.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ImagePlane> out;
  for (const std::string& f : files) out.push_back(read_pgm(f));
  return out;
}

}  // namespace

LrSchedule TrainConfig::schedule() const {
  LrSchedule s;
  s.initial = lr_initial;
  s.decay_factor = lr_decay;
  s.decay_interval = lr_decay_interval > 0 ? lr_decay_interval
                                           : std::max<std::int64_t>(500, steps / 10);
  s.floor = lr_floor;
  return s;
}

ToyCorpus::ToyCorpus(std::uint64_t seed, int image_size, int count, const std::string& dir) {
  Rng rng(seed ^ 0xc0ffee123456789ull);
  for (int i = 0; i < count; ++i) {
    switch (i % 3) {
      case 0: images_.push_back(make_grating(rng, image_size)); break;
      case 1: images_.push_back(make_step_edge(rng, image_size)); break;
      default: images_.push_back(make_filtered_noise(rng, image_size)); break;
    }
  }
  if (!dir.empty()) {
    for (ImagePlane& img : load_dir_images(dir)) images_.push_back(std::move(img));
  }
  for (const ImagePlane& img : images_) img.validate();
}

ImagePlane ToyCorpus::random_patch(Rng& rng, int patch) const {
  const ImagePlane& src = images_[static_cast<std::size_t>(
      rng.next_int(0, static_cast<std::int64_t>(images_.size()) - 1))];
  if (src.width < patch || src.height < patch) {
    throw ValueError("corpus image smaller than patch size");
  }
  const int x0 = static_cast<int>(rng.next_int(0, src.width - patch));
  const int y0 = static_cast<int>(rng.next_int(0, src.height - patch));
  ImagePlane out(patch, patch);
  for (int y = 0; y < patch; ++y) {
    for (int x = 0; x < patch; ++x) out.at(y, x) = src.at(y0 + y, x0 + x);
  }
  return out;
}

std::vector<ImagePlane> ToyCorpus::heldout_set(std::uint64_t seed, int count, int size) {
  Rng rng(seed ^ 0x9d2c5680aa55aa55ull);
  std::vector<ImagePlane> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(make_grating(rng, size));
  return out;
}

int sample_quality(Rng& rng, int lo, int hi) {
  if (lo < 1 || hi > 100 || lo > hi) throw ValueError("sample_quality: bad range");
  return static_cast<int>(rng.next_int(lo, hi));
}

namespace {

struct StageSetup {
  ToyCorpus corpus;
  Rng patch_rng;
  Rng quality_rng;
  std::vector<ImagePlane> heldout;

  StageSetup(const TrainConfig& cfg)
      : corpus(Rng(cfg.seed).fork(10).next_u64(), cfg.patch + 32, 24, cfg.corpus_dir),
        patch_rng(Rng(cfg.seed).fork(11).next_u64()),
        quality_rng(Rng(cfg.seed).fork(12).next_u64()),
        heldout(ToyCorpus::heldout_set(cfg.seed, cfg.heldout_images, 64)) {}
};

void scale_grads(const std::vector<Tensor>& params, double factor) {
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    Tensor t = p;
    auto& g = t.node()->grad;
    for (double& v : g) v *= factor;
  }
}

// I_G' + step * ste_round(residue / step), wrapped/clamped per channel; the
// straight-through estimator makes the lattice transparent to gradients.
Tensor ste_reconstruct(const Tensor& maps, const Tensor& predicted, const QuantizerSpec& spec) {
  Tensor out;
  for (int c = 0; c < gabor::kNumParams; ++c) {
    const double step = spec.step(c);
    Tensor d = sub(slice_channels(maps, c, c + 1), slice_channels(predicted, c, c + 1));
    if (c == gabor::kOrientation) d = wrap_periodic(d, -kPi / 2.0, kPi);
    Tensor q = scale(ste_round(scale(d, 1.0 / step)), step);
    Tensor v = add(slice_channels(predicted, c, c + 1), q);
    if (c == gabor::kOrientation) {
      v = wrap_periodic(v, 0.0, kPi);
    } else {
      v = clamp(v, gabor::kParamLo[c], gabor::kParamHi[c]);
    }
    out = c == 0 ? v : concat_channels(out, v);
  }
  return out;
}

struct HeldoutStage1 {
  double l1 = 0.0;
  double psnr_db = 0.0;
};

HeldoutStage1 eval_stage1(const ModelWeights& w, const std::vector<ImagePlane>& heldout,
                          int quality) {
  NoGradGuard ng;
  HeldoutStage1 res;
  double mse_acc = 0.0;
  for (const ImagePlane& img : heldout) {
    const Tensor x = img.to_tensor();
    const Tensor maps = gabor_net_forward(w.gabor_net, x);
    const Tensor y = gabor::gabor_downsample(x, maps);
    const Tensor yhat = simulate_base(y, quality);
    const Tensor xhat = w.upsampler.forward(yhat, maps, false);
    const auto &a = xhat.data(), &b = x.data();
    double l1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      l1 += std::abs(d);
      m2 += d * d;
    }
    res.l1 += l1 / static_cast<double>(a.size());
    mse_acc += m2 / static_cast<double>(a.size());
  }
  res.l1 /= static_cast<double>(heldout.size());
  mse_acc /= static_cast<double>(heldout.size());
  res.psnr_db = mse_acc <= 0.0 ? 99.0 : std::min(99.0, 10.0 * std::log10(1.0 / mse_acc));
  return res;
}

}  // namespace

void stage1_train(ModelWeights& weights, const TrainConfig& cfg, TrainLogFn log) {
  StageSetup setup(cfg);
  std::vector<Tensor> params = weights.gabor_net.trainable();
  for (const Tensor& t : weights.upsampler.trainable()) params.push_back(t);
  AdamState adam(cfg.schedule(), cfg.beta1, cfg.beta2);
  for (const Tensor& p : params) {
    Tensor t = p;
    t.zero_grad();
  }

  double heldout_metric = 0.0;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    double loss_acc = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const ImagePlane patch = setup.corpus.random_patch(setup.patch_rng, cfg.patch);
      const int q = sample_quality(setup.quality_rng, cfg.quality_lo, cfg.quality_hi);
      const Tensor x = patch.to_tensor();
      const Tensor maps = gabor_net_forward(weights.gabor_net, x);
      const Tensor y = gabor::gabor_downsample(x, maps);
      const Tensor yhat = simulate_base(y, q);
      const Tensor xhat = weights.upsampler.forward(yhat, maps, false);
      const Tensor loss = l1_loss(xhat, x);
      loss.backward();
      loss_acc += loss.item();
      if (!std::isfinite(loss_acc)) throw ValueError("stage1: loss became non-finite");
    }
    scale_grads(params, 1.0 / cfg.batch);
    adam.step(params);
    if (log && (step % cfg.eval_interval == 0 || step + 1 == cfg.steps)) {
      heldout_metric = eval_stage1(weights, setup.heldout, 50).psnr_db;
      log({step, adam.current_rate(), loss_acc / cfg.batch, heldout_metric});
    } else if (log) {
      log({step, adam.current_rate(), loss_acc / cfg.batch, heldout_metric});
    }
  }
}

void stage2_train(ModelWeights& weights, const TrainConfig& cfg, TrainLogFn log) {
  const std::uint64_t gabor_digest = weights.component_digest("gabor_net/");
  const std::uint64_t up_digest = weights.component_digest("upsampler/");

  StageSetup setup(cfg);
  std::vector<Tensor> params = weights.predict_net.trainable();
  AdamState adam(cfg.schedule(), cfg.beta1, cfg.beta2);
  for (const Tensor& p : params) {
    Tensor t = p;
    t.zero_grad();
  }

  double heldout_metric = 0.0;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    double loss_acc = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const ImagePlane patch = setup.corpus.random_patch(setup.patch_rng, cfg.patch);
      const int q = sample_quality(setup.quality_rng, cfg.quality_lo, cfg.quality_hi);

      Tensor target;
      ImagePlane base_decoded;
      {
        NoGradGuard ng;
        const Tensor x = patch.to_tensor();
        target = gabor_net_forward(weights.gabor_net, x);
        const ImagePlane y = gabor::downsample(patch, target);
        base_decoded = decode_base(encode_base(y, q));
      }
      const Tensor pred = predict_params(weights.predict_net, base_decoded.to_tensor());
      Tensor loss;
      for (int c = 0; c < gabor::kNumParams; ++c) {
        const Tensor pc = slice_channels(pred, c, c + 1);
        const Tensor tc = slice_channels(target, c, c + 1);
        const Tensor lc = c == gabor::kOrientation ? l1_loss_wrapped(pc, tc, kPi) : l1_loss(pc, tc);
        loss = c == 0 ? lc : add(loss, lc);
      }
      loss = scale(loss, 1.0 / gabor::kNumParams);
      loss.backward();
      loss_acc += loss.item();
    }
    scale_grads(params, 1.0 / cfg.batch);
    adam.step(params);
    if (log && (step % cfg.eval_interval == 0 || step + 1 == cfg.steps)) {
      heldout_metric = heldout_prediction_error(weights, setup.heldout, 50);
      log({step, adam.current_rate(), loss_acc / cfg.batch, heldout_metric});
    } else if (log) {
      log({step, adam.current_rate(), loss_acc / cfg.batch, heldout_metric});
    }
  }

  if (weights.component_digest("gabor_net/") != gabor_digest ||
      weights.component_digest("upsampler/") != up_digest) {
    throw ValueError("stage2: frozen components were modified");
  }
}

void stage3_train(ModelWeights& weights, const TrainConfig& cfg, TrainLogFn log) {
  const std::uint64_t gabor_digest = weights.component_digest("gabor_net/");
  const std::uint64_t predict_digest = weights.component_digest("predict_net/");

  StageSetup setup(cfg);
  std::vector<Tensor> params = weights.upsampler.trainable();
  AdamState adam(cfg.schedule(), cfg.beta1, cfg.beta2);
  for (const Tensor& p : params) {
    Tensor t = p;
    t.zero_grad();
  }

  double heldout_metric = 0.0;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    double loss_acc = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const ImagePlane patch = setup.corpus.random_patch(setup.patch_rng, cfg.patch);
      const int q = sample_quality(setup.quality_rng, cfg.quality_lo, cfg.quality_hi);

      Tensor maps, predicted, y_tensor;
      QuantizerSpec spec;
      {
        NoGradGuard ng;
        const Tensor x = patch.to_tensor();
        maps = gabor_net_forward(weights.gabor_net, x);
        y_tensor = gabor::gabor_downsample(x, maps);
        const std::vector<std::uint8_t> bytes =
            encode_base(ImagePlane::from_tensor(y_tensor), q);
        predicted = predict_params(weights.predict_net, decode_base(bytes).to_tensor());
        const RateControlResult rc = rate_control(
            maps, predicted, static_cast<std::int64_t>(bytes.size()) * 8, 0.20);
        spec = rc.spec;
      }
      const Tensor received = ste_reconstruct(maps, predicted, spec);
      const Tensor yhat = simulate_base(y_tensor, q);
      const Tensor x = patch.to_tensor();
      const Tensor xhat = weights.upsampler.forward(yhat, received, false);
      const Tensor loss = l1_loss(xhat, x);
      loss.backward();
      loss_acc += loss.item();
    }
    scale_grads(params, 1.0 / cfg.batch);
    adam.step(params);
    if (log && (step % cfg.eval_interval == 0 || step + 1 == cfg.steps)) {
      heldout_metric = heldout_pipeline_psnr(weights, setup.heldout, 50);
      log({step, adam.current_rate(), loss_acc / cfg.batch, heldout_metric});
    } else if (log) {
      log({step, adam.current_rate(), loss_acc / cfg.batch, heldout_metric});
    }
  }

  if (weights.component_digest("gabor_net/") != gabor_digest ||
      weights.component_digest("predict_net/") != predict_digest) {
    throw ValueError("stage3: frozen components were modified");
  }
}

double heldout_stage1_l1(const ModelWeights& weights, const std::vector<ImagePlane>& heldout,
                         int quality) {
  return eval_stage1(weights, heldout, quality).l1;
}

namespace {

double prediction_error_against(const Tensor& pred, const Tensor& target) {
  const int h = target.dim(2), w = target.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const auto &pv = pred.data(), &tv = target.data();
  double total = 0.0;
  for (int c = 0; c < gabor::kNumParams; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      double d = pv[c * plane + i] - tv[c * plane + i];
      if (c == gabor::kOrientation) {
        d -= kPi * std::floor(d / kPi + 0.5);
        if (d <= -0.5 * kPi) d += kPi;
      }
      acc += std::abs(d);
    }
    // normalize by channel range so the five channels weigh equally
    total += acc / (static_cast<double>(plane) * (gabor::kParamHi[c] - gabor::kParamLo[c]));
  }
  return total / gabor::kNumParams;
}

}  // namespace

double heldout_prediction_error(const ModelWeights& weights,
                                const std::vector<ImagePlane>& heldout, int quality) {
  NoGradGuard ng;
  double acc = 0.0;
  for (const ImagePlane& img : heldout) {
    const Tensor x = img.to_tensor();
    const Tensor target = gabor_net_forward(weights.gabor_net, x);
    const ImagePlane y = gabor::downsample(img, target);
    const ImagePlane yhat = decode_base(encode_base(y, quality));
    const Tensor pred = predict_params(weights.predict_net, yhat.to_tensor());
    acc += prediction_error_against(pred, target);
  }
  return acc / static_cast<double>(heldout.size());
}

double heldout_midpoint_error(const ModelWeights& weights,
                              const std::vector<ImagePlane>& heldout, int quality) {
  (void)quality;
  NoGradGuard ng;
  double acc = 0.0;
  for (const ImagePlane& img : heldout) {
    const Tensor x = img.to_tensor();
    const Tensor target = gabor_net_forward(weights.gabor_net, x);
    std::vector<double> mid(target.size());
    const std::size_t plane = static_cast<std::size_t>(target.dim(2)) * target.dim(3);
    for (int c = 0; c < gabor::kNumParams; ++c) {
      const double m = 0.5 * (gabor::kParamLo[c] + gabor::kParamHi[c]);
      for (std::size_t i = 0; i < plane; ++i) mid[c * plane + i] = m;
    }
    const Tensor midpoint = Tensor::from_data(target.shape(), std::move(mid));
    acc += prediction_error_against(midpoint, target);
  }
  return acc / static_cast<double>(heldout.size());
}

double heldout_pipeline_psnr(const ModelWeights& weights, const std::vector<ImagePlane>& heldout,
                             int quality, CodingMode mode) {
  double acc = 0.0;
  for (const ImagePlane& img : heldout) {
    const AddlStream s = encode(img, quality, weights, 0.20, mode);
    acc += psnr(decode(s, weights), img);
  }
  return acc / static_cast<double>(heldout.size());
}

}  // namespace addl
