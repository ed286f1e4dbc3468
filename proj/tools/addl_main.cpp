// addl: dual-layer image codec with content-adaptive downsampling.
//
// Exit codes: 0 ok, 2 usage, 3 format error, 4 model mismatch, 5 internal.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "addl/base_codec.hpp"
#include "addl/common.hpp"
#include "addl/container.hpp"
#include "addl/gabor.hpp"
#include "addl/image.hpp"
#include "addl/nets.hpp"
#include "addl/pipeline.hpp"
#include "addl/selftest.hpp"
#include "addl/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitModelMismatch = 4;
constexpr int kExitInternal = 5;

addl::ModelWeights load_weights_or_die(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw addl::FormatError("weights file not found: " + path);
  }
  return addl::ModelWeights::load(path);
}

struct RdRow {
  std::string image;
  int quality = 0;
  std::string mode;
  double bpp_total = 0, bpp_base = 0, bpp_side = 0, bpp_header = 0;
  double psnr_db = 0;
  bool budget_exceeded = false;
};

// Baseline: bicubic x1/2 -> base codec -> bicubic x2; counts only the base
// codec payload bits.
RdRow run_baseline(const std::string& name, const addl::ImagePlane& img, int quality) {
  const addl::ImagePlane padded = addl::pad_to_even(img);
  const addl::ImagePlane low = addl::bicubic_resize(padded, 0.5);
  const std::vector<std::uint8_t> bytes = addl::encode_base(low, quality);
  addl::ImagePlane up = addl::bicubic_resize(addl::decode_base(bytes), 2.0);
  up = addl::crop_plane(up, img.width, img.height);
  RdRow row;
  row.image = name;
  row.quality = quality;
  row.mode = "baseline";
  row.bpp_total = row.bpp_base =
      static_cast<double>(bytes.size()) * 8.0 / (static_cast<double>(img.width) * img.height);
  row.psnr_db = addl::psnr(up, img);
  return row;
}

RdRow run_mode(const std::string& name, const addl::ImagePlane& img, int quality,
               const addl::ModelWeights& weights, addl::CodingMode mode, double budget) {
  const addl::EncodeResult enc = addl::encode_detailed(img, quality, weights, budget, mode);
  const addl::ImagePlane rec = addl::decode(enc.stream, weights);
  const addl::BppBreakdown b = addl::bpp(enc.stream, img.width, img.height);
  RdRow row;
  row.image = name;
  row.quality = quality;
  row.mode = addl::mode_name(mode);
  row.bpp_total = b.total;
  row.bpp_base = b.base;
  row.bpp_side = b.side;
  row.bpp_header = b.header;
  row.psnr_db = addl::psnr(rec, img);
  row.budget_exceeded = enc.budget_exceeded;
  return row;
}

std::vector<std::pair<std::string, addl::ImagePlane>> load_corpus(const std::string& spec,
                                                                  std::uint64_t seed) {
  std::vector<std::pair<std::string, addl::ImagePlane>> out;
  if (spec == "synthetic") {
    const addl::ToyCorpus corpus(seed, 96, 10);
    for (std::size_t i = 0; i < corpus.images().size(); ++i) {
      out.emplace_back("synthetic-" + std::to_string(i), corpus.images()[i]);
    }
    return out;
  }
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(spec)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw addl::ValueError("no .pgm files in " + spec);
  for (const std::string& f : files) {
    out.emplace_back(std::filesystem::path(f).stem().string(), addl::read_pgm(f));
  }
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"addl: dual-layer image codec with content-adaptive downsampling"};
  app.require_subcommand(1);

  // ---- compress ----
  auto* c_cmd = app.add_subcommand("compress", "Compress a PGM image to an .addl stream");
  std::string c_in, c_out, c_weights, c_ablation = "full";
  int c_quality = 50;
  double c_budget = 0.20;
  c_cmd->add_option("input", c_in, "input image (P5 PGM)")->required();
  c_cmd->add_option("output", c_out, "output .addl stream")->required();
  c_cmd->add_option("--quality,-q", c_quality, "base layer quality 1..100")->default_val(50);
  c_cmd->add_option("--side-budget", c_budget, "side info budget as a fraction of base bits")
      ->default_val(0.20);
  c_cmd->add_option("--weights,-w", c_weights, "weight checkpoint")->required();
  c_cmd->add_option("--ablation", c_ablation, "full|no-side|no-pred|no-gsac")->default_val("full");

  // ---- decompress ----
  auto* d_cmd = app.add_subcommand("decompress", "Decode an .addl stream to a PGM image");
  std::string d_in, d_out, d_weights;
  d_cmd->add_option("input", d_in, "input .addl stream")->required();
  d_cmd->add_option("output", d_out, "output image (P5 PGM)")->required();
  d_cmd->add_option("--weights,-w", d_weights, "weight checkpoint")->required();

  // ---- train ----
  auto* t_cmd = app.add_subcommand("train", "Run one training stage");
  int t_stage = 1;
  std::string t_corpus = "synthetic", t_out, t_init, t_log;
  std::int64_t t_steps = 300;
  std::uint64_t t_seed = 1;
  int t_patch = 64, t_batch = 8;
  t_cmd->add_option("--stage", t_stage, "training stage 1|2|3")->required();
  t_cmd->add_option("--corpus", t_corpus, "corpus directory or 'synthetic'")
      ->default_val("synthetic");
  t_cmd->add_option("--seed", t_seed, "rng seed")->default_val(1);
  t_cmd->add_option("--steps", t_steps, "optimizer steps")->default_val(300);
  t_cmd->add_option("--out", t_out, "output weight checkpoint")->required();
  t_cmd->add_option("--init", t_init, "initial weights (required for stages 2 and 3)");
  t_cmd->add_option("--log", t_log, "training log CSV path");
  t_cmd->add_option("--patch", t_patch, "training patch size")->default_val(64);
  t_cmd->add_option("--batch", t_batch, "batch size")->default_val(8);

  // ---- rd-sweep ----
  auto* r_cmd = app.add_subcommand("rd-sweep", "Rate-distortion sweep over a corpus");
  std::string r_corpus, r_weights, r_out = "-", r_modes = "full,baseline";
  std::string r_qualities = "30,50,70";
  std::uint64_t r_seed = 1;
  r_cmd->add_option("corpus", r_corpus, "corpus directory or 'synthetic'")->required();
  r_cmd->add_option("--qualities", r_qualities, "comma separated quality list")
      ->default_val("30,50,70");
  r_cmd->add_option("--weights,-w", r_weights, "weight checkpoint")->required();
  r_cmd->add_option("--modes", r_modes, "comma separated: full,no-side,no-pred,no-gsac,baseline")
      ->default_val("full,baseline");
  r_cmd->add_option("--out", r_out, "output CSV ('-' for stdout)")->default_val("-");
  r_cmd->add_option("--seed", r_seed, "seed for the synthetic corpus")->default_val(1);

  // ---- inspect-params ----
  auto* i_cmd = app.add_subcommand("inspect-params",
                                   "Dump the five estimated parameter planes as PGM images");
  std::string i_in, i_weights, i_outdir;
  i_cmd->add_option("input", i_in, "input image (P5 PGM)")->required();
  i_cmd->add_option("--weights,-w", i_weights, "weight checkpoint")->required();
  i_cmd->add_option("--outdir", i_outdir, "output directory")->required();

  // ---- sync-check ----
  auto* s_cmd = app.add_subcommand("sync-check",
                                   "Verify encoder/decoder parameter synchronization");
  std::string s_in, s_weights, s_dec_weights, s_dump;
  int s_quality = 50;
  s_cmd->add_option("input", s_in, "input image (P5 PGM)")->required();
  s_cmd->add_option("--weights,-w", s_weights, "encoder weight checkpoint")->required();
  s_cmd->add_option("--decoder-weights", s_dec_weights,
                    "decoder weights (defaults to encoder weights)");
  s_cmd->add_option("--quality,-q", s_quality, "base layer quality")->default_val(50);
  s_cmd->add_option("--dump-params", s_dump, "write reconstructed parameter bytes to this file");

  // ---- selftest ----
  auto* st_cmd = app.add_subcommand("selftest", "Run the oracle and gradient suites");
  int st_instances = 20, st_draws = 1000;
  st_cmd->add_option("--instances", st_instances, "gradient-check instances per op")
      ->default_val(20);
  st_cmd->add_option("--draws", st_draws, "kernel oracle draws")->default_val(1000);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (c_cmd->parsed()) {
    const addl::ImagePlane img = addl::read_pgm(c_in);
    const addl::ModelWeights w = load_weights_or_die(c_weights);
    const addl::AddlStream s =
        addl::encode(img, c_quality, w, c_budget, addl::parse_mode(c_ablation));
    addl::write_stream(c_out, s);
    return kExitOk;
  }

  if (d_cmd->parsed()) {
    const addl::AddlStream s = addl::read_stream(d_in);
    const addl::ModelWeights w = load_weights_or_die(d_weights);
    addl::write_pgm(d_out, addl::decode(s, w));
    return kExitOk;
  }

  if (t_cmd->parsed()) {
    addl::TrainConfig cfg;
    cfg.stage = t_stage;
    cfg.steps = t_steps;
    cfg.seed = t_seed;
    cfg.patch = t_patch;
    cfg.batch = t_batch;
    if (t_corpus != "synthetic") cfg.corpus_dir = t_corpus;

    addl::ModelWeights weights = t_init.empty()
                                     ? addl::ModelWeights::init(addl::ModelConfig{}, t_seed)
                                     : load_weights_or_die(t_init);
    if (t_stage != 1 && t_init.empty()) {
      std::cerr << "train: stages 2 and 3 need --init weights from the previous stage\n";
      return kExitUsage;
    }

    std::ofstream log_file;
    addl::TrainLogFn log_fn;
    if (!t_log.empty()) {
      log_file.open(t_log, std::ios::trunc);
      if (!log_file) throw addl::ValueError("cannot open log file " + t_log);
      log_file << "step,lr,loss,heldout_psnr\n";
      log_fn = [&log_file](const addl::TrainLogRow& row) {
        log_file << row.step << "," << row.lr << "," << row.loss << "," << row.heldout_psnr
                 << "\n";
      };
    } else {
      log_fn = [](const addl::TrainLogRow& row) {
        if (row.step % 25 == 0) {
          std::fprintf(stderr, "step %6lld  lr %.3g  loss %.5f  heldout %.3f\n",
                       static_cast<long long>(row.step), row.lr, row.loss, row.heldout_psnr);
        }
      };
    }

    switch (t_stage) {
      case 1: addl::stage1_train(weights, cfg, log_fn); break;
      case 2: addl::stage2_train(weights, cfg, log_fn); break;
      case 3: addl::stage3_train(weights, cfg, log_fn); break;
      default:
        std::cerr << "train: stage must be 1, 2, or 3\n";
        return kExitUsage;
    }
    weights.save(t_out);
    return kExitOk;
  }

  if (r_cmd->parsed()) {
    const addl::ModelWeights w = load_weights_or_die(r_weights);
    const auto corpus = load_corpus(r_corpus, r_seed);

    std::vector<int> qualities;
    {
      std::stringstream ss(r_qualities);
      std::string tok;
      while (std::getline(ss, tok, ',')) qualities.push_back(std::stoi(tok));
    }
    std::vector<std::string> modes;
    {
      std::stringstream ss(r_modes);
      std::string tok;
      while (std::getline(ss, tok, ',')) modes.push_back(tok);
    }

    struct Job {
      std::size_t image;
      int quality;
      std::string mode;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      for (int q : qualities) {
        for (const std::string& m : modes) jobs.push_back({i, q, m});
      }
    }
    std::vector<RdRow> rows(jobs.size());
    addl::parallel_for(static_cast<int>(jobs.size()), [&](int ji) {
      const Job& job = jobs[static_cast<std::size_t>(ji)];
      const auto& [name, img] = corpus[job.image];
      rows[static_cast<std::size_t>(ji)] =
          job.mode == "baseline"
              ? run_baseline(name, img, job.quality)
              : run_mode(name, img, job.quality, w, addl::parse_mode(job.mode), 0.20);
    });
    std::sort(rows.begin(), rows.end(), [](const RdRow& a, const RdRow& b) {
      return std::tie(a.image, a.quality, a.mode) < std::tie(b.image, b.quality, b.mode);
    });

    std::ostringstream csv;
    csv << "image,quality,mode,bpp_total,bpp_base,bpp_side,bpp_header,psnr,budget_exceeded\n";
    for (const RdRow& r : rows) {
      csv << r.image << "," << r.quality << "," << r.mode << "," << r.bpp_total << ","
          << r.bpp_base << "," << r.bpp_side << "," << r.bpp_header << "," << r.psnr_db << ","
          << (r.budget_exceeded ? 1 : 0) << "\n";
    }
    if (r_out == "-") {
      std::cout << csv.str();
    } else {
      std::ofstream f(r_out, std::ios::trunc);
      if (!f) throw addl::ValueError("cannot open " + r_out);
      f << csv.str();
    }
    return kExitOk;
  }

  if (i_cmd->parsed()) {
    const addl::ImagePlane img = addl::read_pgm(i_in);
    const addl::ModelWeights w = load_weights_or_die(i_weights);
    std::filesystem::create_directories(i_outdir);
    addl::NoGradGuard ng;
    const addl::Tensor maps =
        addl::gabor_net_forward(w.gabor_net, addl::pad_to_even(img).to_tensor());
    static const char* kNames[5] = {"wavelength", "orientation", "phase", "sigma", "aspect"};
    const int h = maps.dim(2), wd = maps.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    for (int c = 0; c < addl::gabor::kNumParams; ++c) {
      addl::ImagePlane out(wd, h);
      const double lo = addl::gabor::kParamLo[c], hi = addl::gabor::kParamHi[c];
      for (std::size_t i = 0; i < plane; ++i) {
        out.samples[i] = (maps.data()[c * plane + i] - lo) / (hi - lo);
      }
      addl::write_pgm((std::filesystem::path(i_outdir) / (std::string(kNames[c]) + ".pgm")).string(),
                      out);
    }
    return kExitOk;
  }

  if (s_cmd->parsed()) {
    const addl::ImagePlane img = addl::read_pgm(s_in);
    const addl::ModelWeights w = load_weights_or_die(s_weights);
    addl::ModelWeights dec_w;
    const addl::ModelWeights* dec_ptr = nullptr;
    if (!s_dec_weights.empty()) {
      dec_w = load_weights_or_die(s_dec_weights);
      dec_ptr = &dec_w;
    }
    const addl::SyncReport rep = addl::sync_check(img, s_quality, w, dec_ptr);
    if (!s_dump.empty()) {
      // dump the receiver-side reconstructed parameter bytes for cross-process
      // comparison
      const addl::EncodeResult enc = addl::encode_detailed(img, s_quality, w);
      const addl::DecodeResult dec =
          addl::decode_detailed(enc.stream, dec_ptr ? *dec_ptr : w, true);
      std::ofstream f(s_dump, std::ios::binary | std::ios::trunc);
      const auto& v = dec.params_received.data();
      f.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    std::printf("sync: %s  (checked %zu values, max |diff| %.3g)\n",
                rep.match ? "MATCH" : "MISMATCH", rep.values, rep.max_abs_diff);
    return rep.match ? kExitOk : kExitInternal;
  }

  if (st_cmd->parsed()) {
    bool all_ok = true;
    for (const addl::SelfTestResult& r : addl::run_selftests(st_instances, st_draws)) {
      std::printf("[%s] %-20s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  r.detail.c_str(), r.seconds);
      all_ok = all_ok && r.passed;
    }
    return all_ok ? kExitOk : kExitInternal;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const addl::ModelMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModelMismatch;
  } catch (const addl::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const addl::ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
