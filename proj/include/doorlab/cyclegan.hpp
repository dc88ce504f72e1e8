// Copyright 2026 The Doorlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOORLAB_CYCLEGAN_HPP_
#define DOORLAB_CYCLEGAN_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "doorlab/adapt.hpp"
#include "doorlab/nn.hpp"
#include "doorlab/render.hpp"

namespace doorlab {

// Learned appearance translators: one miniature CycleGAN (LSGAN objectives
// plus L1 cycle consistency) per modality. RGB generators see 3 channels in
// [0,1]; depth generators see 1 channel, clipped and normalized to [0,1] by
// depth_clip. The oracle adapter stays the reference path.

struct CycleGanConfig {
  int height = 64;
  int width = 64;
  int base_width = 8;
  int batch_size = 4;
  int steps = 400;
  int checkpoint_interval = 100;
  double lr = 2e-4;
  double cycle_weight = 10.0;
  double depth_clip = 10.0;
  std::uint64_t seed = 7;
};

inline std::string config_hash(const CycleGanConfig& c) {
  std::string s = std::to_string(c.height) + "," + std::to_string(c.width) +
                  "," + std::to_string(c.base_width) + "," +
                  std::to_string(c.batch_size) + "," +
                  std::to_string(c.steps) + "," +
                  std::to_string(c.checkpoint_interval) + "," +
                  std::to_string(c.lr) + "," + std::to_string(c.cycle_weight) +
                  "," + std::to_string(c.depth_clip) + "," +
                  std::to_string(c.seed);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_str(s)));
  return std::string(buf);
}

namespace detail {

// Generator / discriminator graph builders shared by the training route
// (weights as tape params) and the frozen inference route (weights as
// inputs). `get` maps a parameter name to a tape node.
template <typename S>
nn::Var cg_generator(nn::Tape<S>& t, const CycleGanConfig& cfg, int channels,
                     const std::function<nn::Var(const std::string&,
                                                 const std::string&)>& get,
                     nn::Var x) {
  int w = cfg.base_width;
  int hh = cfg.height, ww = cfg.width;
  auto conv = [&](const std::string& name, nn::Var in,
                  const nn::ConvSpec& spec) {
    return t.conv2d(in, get(name, ".w"), get(name, ".b"), spec);
  };
  nn::Var h =
      t.relu(conv("enc1", x, nn::ConvSpec{channels, hh, ww, w, 5, 5, 2, 2}));
  hh /= 2; ww /= 2;
  h = t.relu(conv("enc2", h, nn::ConvSpec{w, hh, ww, 2 * w, 3, 3, 2, 1}));
  hh /= 2; ww /= 2;
  nn::Var m = conv("mid", h, nn::ConvSpec{2 * w, hh, ww, 2 * w, 3, 3, 1, 1});
  h = t.relu(t.add(h, m));
  h = t.upsample2x(h, 2 * w, hh, ww);
  hh *= 2; ww *= 2;
  h = t.relu(conv("dec1", h, nn::ConvSpec{2 * w, hh, ww, w, 3, 3, 1, 1}));
  h = t.upsample2x(h, w, hh, ww);
  hh *= 2; ww *= 2;
  nn::Var out =
      conv("dec2", h, nn::ConvSpec{w, hh, ww, channels, 3, 3, 1, 1});
  return t.sigmoid(out);  // outputs live in (0,1), matching the packing
}

template <typename S>
nn::Var cg_discriminator(nn::Tape<S>& t, const CycleGanConfig& cfg,
                         int channels, nn::ParamStore<S>& d, nn::Var x) {
  int w = cfg.base_width;
  int hh = cfg.height, ww = cfg.width;
  auto conv = [&](const std::string& name, nn::Var in,
                  const nn::ConvSpec& spec) {
    return t.conv2d(in, t.param(d.get(name + ".w")),
                    t.param(d.get(name + ".b")), spec);
  };
  nn::Var h =
      t.relu(conv("c1", x, nn::ConvSpec{channels, hh, ww, w, 5, 5, 2, 2}));
  hh /= 2; ww /= 2;
  h = t.relu(conv("c2", h, nn::ConvSpec{w, hh, ww, 2 * w, 3, 3, 2, 1}));
  hh /= 2; ww /= 2;
  return conv("out", h, nn::ConvSpec{2 * w, hh, ww, 1, 3, 3, 2, 1});
}

template <typename S>
void cg_build_generator(nn::ParamStore<S>& g, int channels, int w, Rng& rng) {
  auto add = [&](const std::string& name, int out_c, int krows) {
    nn::he_init(g.add(name + ".w", out_c, krows), rng);
    g.add(name + ".b", out_c, 1);
  };
  add("enc1", w, channels * 5 * 5);
  add("enc2", 2 * w, w * 3 * 3);
  add("mid", 2 * w, 2 * w * 3 * 3);
  add("dec1", w, 2 * w * 3 * 3);
  add("dec2", channels, w * 3 * 3);
}

template <typename S>
void cg_build_discriminator(nn::ParamStore<S>& d, int channels, int w,
                            Rng& rng) {
  auto add = [&](const std::string& name, int out_c, int krows) {
    nn::he_init(d.add(name + ".w", out_c, krows), rng);
    d.add(name + ".b", out_c, 1);
  };
  add("c1", w, channels * 5 * 5);
  add("c2", 2 * w, w * 3 * 3);
  add("out", 1, 2 * w * 3 * 3);
}

}  // namespace detail

inline int modality_channels(Modality m) {
  return m == Modality::kRgb ? 3 : 1;
}

// A frozen generator handle: owns a copy of the weights, forwards without
// building gradients, safe for concurrent use.
template <typename S>
class Generator {
 public:
  using MatS = nn::Mat<S>;

  Generator(Modality modality, AdaptDirection direction, CycleGanConfig cfg,
            nn::ParamStore<S> weights)
      : modality_(modality),
        direction_(direction),
        cfg_(std::move(cfg)),
        weights_(std::move(weights)) {}

  Modality modality() const { return modality_; }
  AdaptDirection direction() const { return direction_; }
  const CycleGanConfig& config() const { return cfg_; }
  const nn::ParamStore<S>& weights() const { return weights_; }

  // Columns of flattened channel-major images in [0,1], one per frame.
  MatS forward_cols(const MatS& x) const {
    int ch = modality_channels(modality_);
    if (x.rows() != static_cast<Eigen::Index>(ch) * cfg_.height * cfg_.width) {
      throw ContractViolation("Generator: input shape mismatch");
    }
    nn::Tape<S> t;
    auto get = [&](const std::string& name, const std::string& suffix) {
      return t.input(weights_.get(name + suffix).value);
    };
    nn::Var y = detail::cg_generator(t, cfg_, ch, get, t.input(x));
    return t.val(y);
  }

 private:
  Modality modality_;
  AdaptDirection direction_;
  CycleGanConfig cfg_;
  nn::ParamStore<S> weights_;
};

// ---- modality packing (shared by training and adapt_learned) ----

template <typename S>
nn::Mat<S> pack_rgb_cols(const std::vector<const RgbImage*>& imgs,
                         const CycleGanConfig& cfg) {
  nn::Mat<S> m(3 * cfg.height * cfg.width,
               static_cast<Eigen::Index>(imgs.size()));
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    const RgbImage& img = *imgs[n];
    if (img.height != cfg.height || img.width != cfg.width) {
      throw ContractViolation("pack_rgb_cols: image shape mismatch");
    }
    Eigen::Index r = 0;
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
          m(r++, static_cast<Eigen::Index>(n)) =
              static_cast<S>(img.at(y, x, c) / 255.0);
        }
      }
    }
  }
  return m;
}

template <typename S>
nn::Mat<S> pack_depth_cols(const std::vector<const DepthImage*>& imgs,
                           const CycleGanConfig& cfg) {
  nn::Mat<S> m(cfg.height * cfg.width, static_cast<Eigen::Index>(imgs.size()));
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    const DepthImage& img = *imgs[n];
    if (img.height != cfg.height || img.width != cfg.width) {
      throw ContractViolation("pack_depth_cols: image shape mismatch");
    }
    Eigen::Index r = 0;
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        double d = img.at(y, x, 0);
        if (d < 0.0) d = 0.0;
        if (d > cfg.depth_clip) d = cfg.depth_clip;
        m(r++, static_cast<Eigen::Index>(n)) =
            static_cast<S>(d / cfg.depth_clip);
      }
    }
  }
  return m;
}

// ---- adapt_learned: single forward pass, output clamped to valid range ----

template <typename S>
RgbImage adapt_learned(const RgbImage& img, const Generator<S>& g) {
  if (g.modality() != Modality::kRgb) {
    throw ContractViolation("adapt_learned: generator is not rgb");
  }
  const CycleGanConfig& cfg = g.config();
  nn::Mat<S> out = g.forward_cols(pack_rgb_cols<S>({&img}, cfg));
  RgbImage res(cfg.height, cfg.width, 3);
  Eigen::Index r = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        res.at(y, x, c) = clamp_u8(static_cast<double>(out(r++, 0)) * 255.0);
      }
    }
  }
  return res;
}

template <typename S>
DepthImage adapt_learned(const DepthImage& img, const Generator<S>& g) {
  if (g.modality() != Modality::kDepth) {
    throw ContractViolation("adapt_learned: generator is not depth");
  }
  const CycleGanConfig& cfg = g.config();
  nn::Mat<S> out = g.forward_cols(pack_depth_cols<S>({&img}, cfg));
  DepthImage res(cfg.height, cfg.width, 1);
  Eigen::Index r = 0;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      double d = static_cast<double>(out(r++, 0)) * cfg.depth_clip;
      if (d < 0.0) d = 0.0;
      if (d > cfg.depth_clip) d = cfg.depth_clip;
      res.at(y, x, 0) = static_cast<float>(d);
    }
  }
  return res;
}

template <typename S>
Frame adapt_learned(const Frame& f, const Generator<S>& rgb_g,
                    const Generator<S>& depth_g) {
  Frame out;
  out.rgb = adapt_learned(f.rgb, rgb_g);
  out.depth = adapt_learned(f.depth, depth_g);
  return out;
}

// ---- training ----

template <typename S>
class CycleGan {
 public:
  using Tape = nn::Tape<S>;
  using MatS = nn::Mat<S>;

  CycleGan(Modality modality, CycleGanConfig cfg)
      : modality_(modality), cfg_(cfg), channels_(modality_channels(modality)) {
    Rng rng(seed_mix(cfg_.seed, 0x6A4));
    detail::cg_build_generator(g_sr_, channels_, cfg_.base_width, rng);
    detail::cg_build_generator(g_rs_, channels_, cfg_.base_width, rng);
    detail::cg_build_discriminator(d_real_, channels_, cfg_.base_width, rng);
    detail::cg_build_discriminator(d_sim_, channels_, cfg_.base_width, rng);
    nn::AdamConfig<S> ac;
    ac.lr = static_cast<S>(cfg_.lr);
    opt_g_sr_ = nn::Adam<S>(ac);
    opt_g_rs_ = nn::Adam<S>(ac);
    opt_d_real_ = nn::Adam<S>(ac);
    opt_d_sim_ = nn::Adam<S>(ac);
  }

  Modality modality() const { return modality_; }
  const CycleGanConfig& config() const { return cfg_; }
  nn::ParamStore<S>& gen_store(AdaptDirection d) {
    return d == AdaptDirection::kSim2Real ? g_sr_ : g_rs_;
  }

  Generator<S> generator(AdaptDirection d) const {
    return Generator<S>(modality_, d, cfg_,
                        d == AdaptDirection::kSim2Real ? g_sr_ : g_rs_);
  }

  struct StepStats {
    int step = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double loss_cycle = 0.0;

    bool finite() const {
      return std::isfinite(loss_d) && std::isfinite(loss_g) &&
             std::isfinite(loss_cycle);
    }
  };

  // One alternating update: discriminators on detached fakes, then both
  // generators through the adversarial + cycle objective.
  StepStats train_step(const MatS& sim_batch, const MatS& real_batch) {
    StepStats stats;
    MatS fake_real, fake_sim;
    {
      Tape t;
      fake_real = t.val(gen(t, g_sr_, t.input(sim_batch)));
      fake_sim = t.val(gen(t, g_rs_, t.input(real_batch)));
    }
    {
      Tape t;
      nn::Var dr_real = disc(t, d_real_, t.input(real_batch));
      nn::Var dr_fake = disc(t, d_real_, t.input(fake_real));
      nn::Var ds_real = disc(t, d_sim_, t.input(sim_batch));
      nn::Var ds_fake = disc(t, d_sim_, t.input(fake_sim));
      nn::Var loss = t.add_n({t.mse_to_const(dr_real, S(1)),
                              t.mse_to_const(dr_fake, S(0)),
                              t.mse_to_const(ds_real, S(1)),
                              t.mse_to_const(ds_fake, S(0))});
      d_real_.zero_grads();
      d_sim_.zero_grads();
      t.backward(loss);
      opt_d_real_.step(d_real_);
      opt_d_sim_.step(d_sim_);
      stats.loss_d = static_cast<double>(t.scalar(loss));
    }
    {
      Tape t;
      nn::Var sim_in = t.input(sim_batch);
      nn::Var real_in = t.input(real_batch);
      nn::Var fr = gen(t, g_sr_, sim_in);
      nn::Var fs = gen(t, g_rs_, real_in);
      nn::Var adv = t.add_n({t.mse_to_const(disc(t, d_real_, fr), S(1)),
                             t.mse_to_const(disc(t, d_sim_, fs), S(1))});
      nn::Var cyc_s = t.l1_between(gen(t, g_rs_, fr), sim_in);
      nn::Var cyc_r = t.l1_between(gen(t, g_sr_, fs), real_in);
      nn::Var cyc = t.scale(t.add(cyc_s, cyc_r),
                            static_cast<S>(cfg_.cycle_weight));
      nn::Var loss = t.add(adv, cyc);
      g_sr_.zero_grads();
      g_rs_.zero_grads();
      d_real_.zero_grads();
      d_sim_.zero_grads();
      t.backward(loss);
      opt_g_sr_.step(g_sr_);
      opt_g_rs_.step(g_rs_);
      // Discriminator grads from the generator pass are discarded.
      d_real_.zero_grads();
      d_sim_.zero_grads();
      stats.loss_g = static_cast<double>(t.scalar(loss));
      stats.loss_cycle = static_cast<double>(t.scalar(cyc));
    }
    return stats;
  }

  // Cycle loss of the current weights on a fixed probe batch (no update).
  double cycle_loss(const MatS& sim_batch, const MatS& real_batch) {
    Tape t;
    nn::Var sim_in = t.input(sim_batch);
    nn::Var real_in = t.input(real_batch);
    nn::Var cyc_s = t.l1_between(gen(t, g_rs_, gen(t, g_sr_, sim_in)), sim_in);
    nn::Var cyc_r =
        t.l1_between(gen(t, g_sr_, gen(t, g_rs_, real_in)), real_in);
    return static_cast<double>(t.scalar(t.add(cyc_s, cyc_r)));
  }

  void save(const std::string& prefix) const {
    nn::save_params(g_sr_, prefix + ".g_sr");
    nn::save_params(g_rs_, prefix + ".g_rs");
    nn::save_params(d_real_, prefix + ".d_real");
    nn::save_params(d_sim_, prefix + ".d_sim");
  }

  void load(const std::string& prefix) {
    nn::load_params(g_sr_, prefix + ".g_sr");
    nn::load_params(g_rs_, prefix + ".g_rs");
    nn::load_params(d_real_, prefix + ".d_real");
    nn::load_params(d_sim_, prefix + ".d_sim");
  }

 private:
  nn::Var gen(Tape& t, nn::ParamStore<S>& st, nn::Var x) {
    auto get = [&](const std::string& name, const std::string& suffix) {
      return t.param(st.get(name + suffix));
    };
    return detail::cg_generator(t, cfg_, channels_, get, x);
  }

  nn::Var disc(Tape& t, nn::ParamStore<S>& st, nn::Var x) {
    return detail::cg_discriminator(t, cfg_, channels_, st, x);
  }

  Modality modality_;
  CycleGanConfig cfg_;
  int channels_;
  nn::ParamStore<S> g_sr_, g_rs_, d_real_, d_sim_;
  nn::Adam<S> opt_g_sr_, opt_g_rs_, opt_d_real_, opt_d_sim_;
};

// Trains one per-modality CycleGAN on unpaired image sets. Checkpoints are
// written under out_dir with step tags plus a manifest; pass an empty
// out_dir to skip checkpointing. Divergence (any NaN loss) raises a
// TrainingError naming the last good checkpoint.
template <typename S>
struct TrainGanResult {
  CycleGan<S> gan;
  std::vector<typename CycleGan<S>::StepStats> log;
  double cycle_loss_start = 0.0;
  double cycle_loss_end = 0.0;
};

template <typename S, typename ImageT>
TrainGanResult<S> train_cyclegan(const std::vector<const ImageT*>& sim_images,
                                 const std::vector<const ImageT*>& real_images,
                                 Modality modality, const CycleGanConfig& cfg,
                                 const std::string& out_dir = "") {
  static_assert(std::is_same_v<ImageT, RgbImage> ||
                std::is_same_v<ImageT, DepthImage>);
  if (sim_images.empty() || real_images.empty()) {
    throw ContractViolation("train_cyclegan: empty image set");
  }
  if constexpr (std::is_same_v<ImageT, RgbImage>) {
    if (modality != Modality::kRgb) {
      throw ContractViolation("train_cyclegan: rgb images need rgb modality");
    }
  } else {
    if (modality != Modality::kDepth) {
      throw ContractViolation(
          "train_cyclegan: depth images need depth modality");
    }
  }

  auto pack = [&](const std::vector<const ImageT*>& imgs,
                  const std::vector<std::size_t>& idx) {
    std::vector<const ImageT*> batch;
    for (std::size_t i : idx) batch.push_back(imgs[i]);
    if constexpr (std::is_same_v<ImageT, RgbImage>) {
      return pack_rgb_cols<S>(batch, cfg);
    } else {
      return pack_depth_cols<S>(batch, cfg);
    }
  };
  auto draw = [](Rng& rng, std::size_t n, int k) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(k));
    for (auto& i : idx) i = rng.uniform_index(n);
    return idx;
  };

  TrainGanResult<S> res{CycleGan<S>(modality, cfg), {}, 0.0, 0.0};
  Rng rng(seed_mix(cfg.seed, 0x6A2B));

  std::vector<std::size_t> probe_s = draw(rng, sim_images.size(),
                                          cfg.batch_size);
  std::vector<std::size_t> probe_r = draw(rng, real_images.size(),
                                          cfg.batch_size);
  nn::Mat<S> probe_sim = pack(sim_images, probe_s);
  nn::Mat<S> probe_real = pack(real_images, probe_r);
  res.cycle_loss_start = res.gan.cycle_loss(probe_sim, probe_real);

  namespace fs = std::filesystem;
  std::string last_good = "none";
  nlohmann::json manifest_entries = nlohmann::json::array();
  std::string chash = config_hash(cfg);

  auto checkpoint = [&](int step) {
    if (out_dir.empty()) return;
    fs::create_directories(out_dir);
    char tag[32];
    std::snprintf(tag, sizeof tag, "%06d", step);
    std::string prefix = out_dir + "/" + std::string(to_string(modality)) +
                         "_step" + tag;
    res.gan.save(prefix);
    for (const char* dir : {"sim2real", "real2sim"}) {
      manifest_entries.push_back(
          {{"modality", to_string(modality)},
           {"direction", dir},
           {"step", step},
           {"config_hash", chash},
           {"file", prefix + (std::string(dir) == "sim2real" ? ".g_sr"
                                                             : ".g_rs")}});
    }
    nlohmann::json manifest = {{"checkpoints", manifest_entries}};
    std::ofstream out(out_dir + "/manifest.json");
    out << manifest.dump(2) << "\n";
    last_good = prefix;
  };

  for (int step = 1; step <= cfg.steps; ++step) {
    nn::Mat<S> sim_b = pack(sim_images, draw(rng, sim_images.size(),
                                             cfg.batch_size));
    nn::Mat<S> real_b = pack(real_images, draw(rng, real_images.size(),
                                               cfg.batch_size));
    auto stats = res.gan.train_step(sim_b, real_b);
    stats.step = step;
    if (!stats.finite()) {
      throw TrainingError("train_cyclegan: NaN loss at step " +
                          std::to_string(step) + "; last good checkpoint: " +
                          last_good);
    }
    res.log.push_back(stats);
    if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0) {
      checkpoint(step);
    }
  }
  if (cfg.checkpoint_interval > 0 && cfg.steps % cfg.checkpoint_interval != 0) {
    checkpoint(cfg.steps);
  }
  res.cycle_loss_end = res.gan.cycle_loss(probe_sim, probe_real);
  return res;
}

template <typename S, typename ImageT>
TrainGanResult<S> train_cyclegan(const std::vector<ImageT>& sim_images,
                                 const std::vector<ImageT>& real_images,
                                 Modality modality, const CycleGanConfig& cfg,
                                 const std::string& out_dir = "") {
  std::vector<const ImageT*> sp, rp;
  for (const ImageT& im : sim_images) sp.push_back(&im);
  for (const ImageT& im : real_images) rp.push_back(&im);
  return train_cyclegan<S, ImageT>(sp, rp, modality, cfg, out_dir);
}

}  // namespace doorlab

#endif  // DOORLAB_CYCLEGAN_HPP_
