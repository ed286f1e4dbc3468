#include "addl/nets.hpp"

#include <cmath>

#include "addl/common.hpp"
#include "addl/gabor.hpp"

namespace addl {

namespace {

int round_up(int v, int m) { return (v + m - 1) / m * m; }

Tensor pad_to_multiple(const Tensor& x, int m) {
  const int H = x.dim(2), W = x.dim(3);
  const int Hp = round_up(H, m), Wp = round_up(W, m);
  if (Hp == H && Wp == W) return x;
  return reflect_pad2d(x, 0, Wp - W, 0, Hp - H);
}

void collect_conv(const std::string& prefix, const ConvLayer& c, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".w", c.w});
  out.push_back({prefix + ".b", c.b});
}

void collect_convt(const std::string& prefix, const ConvTransposeLayer& c,
                   std::vector<NamedParam>& out) {
  out.push_back({prefix + ".w", c.w});
  out.push_back({prefix + ".b", c.b});
}

}  // namespace

void init_conv(ConvLayer& layer, int out_c, int in_c, int k, int stride, int pad, Rng& rng,
               double bias_init) {
  const double bound = std::sqrt(6.0 / (in_c * k * k));
  std::vector<double> w(static_cast<std::size_t>(out_c) * in_c * k * k);
  for (double& v : w) v = rng.uniform(-bound, bound);
  layer.w = Tensor::from_data({out_c, in_c, k, k}, std::move(w), true);
  layer.b = Tensor::full({out_c}, bias_init, true);
  layer.stride = stride;
  layer.pad = pad;
}

namespace {

void init_convt(ConvTransposeLayer& layer, int in_c, int out_c, int k, int pad, Rng& rng) {
  const double bound = std::sqrt(6.0 / (in_c * k * k));
  std::vector<double> w(static_cast<std::size_t>(in_c) * out_c * k * k);
  for (double& v : w) v = rng.uniform(-bound, bound);
  layer.w = Tensor::from_data({in_c, out_c, k, k}, std::move(w), true);
  layer.b = Tensor::full({out_c}, 0.0, true);
  layer.pad = pad;
}

void init_gsac(GsacLayer& g, int in_c, int out_c, int hidden, Rng& rng) {
  init_conv(g.extract1, hidden, gabor::kNumParams, 1, 1, 0, rng);
  // bias 1 so the initial modulation sits near identity
  init_conv(g.extract2, in_c, hidden, 1, 1, 0, rng, 1.0);
  init_conv(g.conv, out_c, in_c, 1, 1, 0, rng);
}

UNet init_unet(const UNetConfig& cfg, Rng& rng) {
  UNet net;
  net.cfg = cfg;
  init_conv(net.in_conv, cfg.channels_at(0), 1, 3, 1, 1, rng);
  for (int s = 0; s < cfg.stages; ++s) {
    ConvLayer c1, c2;
    init_conv(c1, cfg.channels_at(s + 1), cfg.channels_at(s), 3, 1, 1, rng);
    init_conv(c2, cfg.channels_at(s + 1), cfg.channels_at(s + 1), 3, 1, 1, rng);
    net.enc.push_back(c1);
    net.enc.push_back(c2);
  }
  for (int l = cfg.stages - 1; l >= cfg.out_level; --l) {
    ConvLayer c1, c2;
    init_conv(c1, cfg.channels_at(l), cfg.channels_at(l + 1) + cfg.channels_at(l), 3, 1, 1, rng);
    init_conv(c2, cfg.channels_at(l), cfg.channels_at(l), 3, 1, 1, rng);
    net.dec.push_back(c1);
    net.dec.push_back(c2);
  }
  init_conv(net.out_conv, gabor::kNumParams, cfg.channels_at(cfg.out_level), 3, 1, 1, rng);
  return net;
}

}  // namespace

int UNetConfig::channels_at(int level) const {
  int c = base_channels;
  for (int i = 0; i < level && i < 3; ++i) c *= 2;
  return c;
}

Tensor UNet::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != 1) throw ValueError("unet: expected (1,1,H,W) input");
  const int H = x.dim(2), W = x.dim(3);
  Tensor cur = pad_to_multiple(x, cfg.pad_multiple());

  std::vector<Tensor> skips;
  cur = relu(in_conv.forward(cur));
  skips.push_back(cur);
  for (int s = 0; s < cfg.stages; ++s) {
    cur = maxpool2(cur);
    cur = relu(enc[2 * s].forward(cur));
    cur = relu(enc[2 * s + 1].forward(cur));
    skips.push_back(cur);
  }
  int di = 0;
  for (int l = cfg.stages - 1; l >= cfg.out_level; --l, ++di) {
    cur = bilinear_up2(cur);
    cur = concat_channels(cur, skips[static_cast<std::size_t>(l)]);
    cur = relu(dec[2 * di].forward(cur));
    cur = relu(dec[2 * di + 1].forward(cur));
  }
  cur = out_conv.forward(cur);

  // crop away the internal padding at the output level
  const int div = 1 << cfg.out_level;
  const int oh = H / div + (H % div != 0), ow = W / div + (W % div != 0);
  if (cur.dim(2) != oh || cur.dim(3) != ow) cur = crop2d(cur, 0, 0, oh, ow);
  return cur;
}

void UNet::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  collect_conv(prefix + "in_conv", in_conv, out);
  for (std::size_t i = 0; i < enc.size(); ++i) {
    collect_conv(prefix + "enc" + std::to_string(i), enc[i], out);
  }
  for (std::size_t i = 0; i < dec.size(); ++i) {
    collect_conv(prefix + "dec" + std::to_string(i), dec[i], out);
  }
  collect_conv(prefix + "out_conv", out_conv, out);
}

std::vector<Tensor> UNet::trainable() const {
  std::vector<Tensor> t{in_conv.w, in_conv.b};
  for (const ConvLayer& c : enc) {
    t.push_back(c.w);
    t.push_back(c.b);
  }
  for (const ConvLayer& c : dec) {
    t.push_back(c.w);
    t.push_back(c.b);
  }
  t.push_back(out_conv.w);
  t.push_back(out_conv.b);
  return t;
}

Tensor param_activation(const Tensor& raw) {
  if (raw.rank() != 4 || raw.dim(1) != gabor::kNumParams) {
    throw ValueError("param_activation: expected 5-channel tensor");
  }
  Tensor out;
  for (int c = 0; c < gabor::kNumParams; ++c) {
    const double lo = gabor::kParamLo[c], hi = gabor::kParamHi[c];
    Tensor ch = add_scalar(scale(sigmoid(slice_channels(raw, c, c + 1)), hi - lo), lo);
    out = c == 0 ? ch : concat_channels(out, ch);
  }
  return out;
}

Tensor gabor_net_forward(const UNet& net, const Tensor& image) {
  if (net.cfg.out_level != 1) throw ValueError("gabor_net_forward: net must output at half res");
  return param_activation(net.forward(image));
}

Tensor predict_params(const UNet& net, const Tensor& base_image) {
  if (net.cfg.out_level != 0) throw ValueError("predict_params: net must output at input res");
  return param_activation(net.forward(base_image));
}

Tensor gsac_forward(const Tensor& x, const Tensor& params, const GsacLayer& layer,
                    bool unit_modulation) {
  if (params.rank() != 4 || params.dim(1) != gabor::kNumParams) {
    throw ValueError("gsac_forward: params must be (1,5,h,w)");
  }
  Tensor mod;
  if (unit_modulation) {
    mod = Tensor::full({x.dim(0), x.dim(1), x.dim(2), x.dim(3)}, 1.0);
  } else {
    Tensor p = params;
    if (p.dim(2) != x.dim(2) || p.dim(3) != x.dim(3)) {
      p = nearest_resize(p, x.dim(2), x.dim(3));
    }
    mod = layer.extract2.forward(relu(layer.extract1.forward(p)));
    if (mod.dim(1) != x.dim(1)) throw ValueError("gsac_forward: modulation channel mismatch");
  }
  return layer.conv.forward(mul(x, mod));
}

void GsacLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  collect_conv(prefix + ".extract1", extract1, out);
  collect_conv(prefix + ".extract2", extract2, out);
  collect_conv(prefix + ".conv", conv, out);
}

std::vector<Tensor> GsacLayer::trainable() const {
  return {extract1.w, extract1.b, extract2.w, extract2.b, conv.w, conv.b};
}

Tensor Upsampler::forward(const Tensor& base, const Tensor& params, bool unit_modulation) const {
  if (base.rank() != 4 || base.dim(1) != 1) throw ValueError("upsampler: expected (1,1,h,w)");
  Tensor h0 = relu(head.forward(base));
  Tensor x = h0;
  for (const UpsamplerBlock& blk : blocks) {
    Tensor t = relu(gsac_forward(x, params, blk.g1, unit_modulation));
    t = relu(gsac_forward(t, params, blk.g2, unit_modulation));
    t = relu(blk.c1.forward(t));
    t = blk.c2.forward(t);
    x = add(x, t);
  }
  Tensor u = relu(up.forward(x));
  Tensor residual = out_conv.forward(u);
  return clamp01(add(bilinear_up2(base), residual));
}

void Upsampler::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  collect_conv(prefix + "head", head, out);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string bp = prefix + "block" + std::to_string(i);
    blocks[i].g1.collect(bp + ".g1", out);
    blocks[i].g2.collect(bp + ".g2", out);
    collect_conv(bp + ".c1", blocks[i].c1, out);
    collect_conv(bp + ".c2", blocks[i].c2, out);
  }
  collect_convt(prefix + "up", up, out);
  collect_conv(prefix + "out_conv", out_conv, out);
}

std::vector<Tensor> Upsampler::trainable() const {
  std::vector<Tensor> t{head.w, head.b};
  for (const UpsamplerBlock& blk : blocks) {
    for (const Tensor& p : blk.g1.trainable()) t.push_back(p);
    for (const Tensor& p : blk.g2.trainable()) t.push_back(p);
    t.push_back(blk.c1.w);
    t.push_back(blk.c1.b);
    t.push_back(blk.c2.w);
    t.push_back(blk.c2.b);
  }
  t.push_back(up.w);
  t.push_back(up.b);
  t.push_back(out_conv.w);
  t.push_back(out_conv.b);
  return t;
}

ModelWeights ModelWeights::init(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.gabor.out_level != 1 || cfg.predict.out_level != 0) {
    throw ValueError("model config: gabor net must emit at half res, predictor at input res");
  }
  Rng root(seed);
  Rng g_rng = root.fork(1), p_rng = root.fork(2), u_rng = root.fork(3);

  ModelWeights w;
  w.cfg = cfg;
  w.gabor_net = init_unet(cfg.gabor, g_rng);
  w.predict_net = init_unet(cfg.predict, p_rng);

  Upsampler& up = w.upsampler;
  up.cfg = cfg.upsampler;
  const int c = cfg.upsampler.width;
  init_conv(up.head, c, 1, 3, 1, 1, u_rng);
  up.blocks.resize(static_cast<std::size_t>(cfg.upsampler.blocks));
  for (UpsamplerBlock& blk : up.blocks) {
    init_gsac(blk.g1, c, c, c, u_rng);
    init_gsac(blk.g2, c, c, c, u_rng);
    init_conv(blk.c1, c, c, 3, 1, 1, u_rng);
    init_conv(blk.c2, c, c, 3, 1, 1, u_rng);
  }
  init_convt(up.up, c, c, 2, 0, u_rng);
  init_conv(up.out_conv, 1, c, 3, 1, 1, u_rng);
  return w;
}

std::vector<NamedParam> ModelWeights::named_params() const {
  std::vector<NamedParam> out;
  const auto cfg_tensor = [](std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor::from_data({n}, std::move(v));
  };
  out.push_back({"config/gabor_net",
                 cfg_tensor({static_cast<double>(cfg.gabor.base_channels),
                             static_cast<double>(cfg.gabor.stages)})});
  out.push_back({"config/predict_net",
                 cfg_tensor({static_cast<double>(cfg.predict.base_channels),
                             static_cast<double>(cfg.predict.stages)})});
  out.push_back({"config/upsampler",
                 cfg_tensor({static_cast<double>(cfg.upsampler.blocks),
                             static_cast<double>(cfg.upsampler.width)})});
  gabor_net.collect("gabor_net/", out);
  predict_net.collect("predict_net/", out);
  upsampler.collect("upsampler/", out);
  return out;
}

void ModelWeights::save(const std::string& path) const { save_checkpoint(path, named_params()); }

ModelWeights ModelWeights::load(const std::string& path) {
  const std::vector<NamedParam> params = load_checkpoint(path);
  auto find = [&params](const std::string& name) -> const Tensor& {
    for (const NamedParam& p : params) {
      if (p.name == name) return p.tensor;
    }
    throw FormatError("checkpoint missing parameter: " + name);
  };

  ModelConfig cfg;
  {
    const Tensor& g = find("config/gabor_net");
    cfg.gabor = UNetConfig{static_cast<int>(g.data()[0]), static_cast<int>(g.data()[1]), 1};
    const Tensor& p = find("config/predict_net");
    cfg.predict = UNetConfig{static_cast<int>(p.data()[0]), static_cast<int>(p.data()[1]), 0};
    const Tensor& u = find("config/upsampler");
    cfg.upsampler = UpsamplerConfig{static_cast<int>(u.data()[0]), static_cast<int>(u.data()[1])};
  }

  // Build nets with the stored architecture, then overwrite every tensor.
  ModelWeights w = init(cfg, /*seed=*/0);
  std::vector<NamedParam> slots = w.named_params();
  for (NamedParam& slot : slots) {
    if (slot.name.rfind("config/", 0) == 0) continue;
    const Tensor& src = find(slot.name);
    if (src.shape() != slot.tensor.shape()) {
      throw FormatError("checkpoint parameter " + slot.name + " has shape " +
                        shape_str(src.shape()) + ", expected " + shape_str(slot.tensor.shape()));
    }
    slot.tensor.mutable_data() = src.data();
  }
  return w;
}

std::uint64_t ModelWeights::digest() const { return checkpoint_digest(named_params()); }

std::uint64_t ModelWeights::component_digest(const std::string& prefix) const {
  std::vector<NamedParam> sub;
  for (const NamedParam& p : named_params()) {
    if (p.name.rfind(prefix, 0) == 0) sub.push_back(p);
  }
  return checkpoint_digest(sub);
}

}  // namespace addl
