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

#ifndef DOORLAB_POLICY_HPP_
#define DOORLAB_POLICY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "doorlab/data.hpp"
#include "doorlab/nn.hpp"
#include "doorlab/render.hpp"
#include "doorlab/world.hpp"

namespace doorlab {

// Width-reduced residual encoders (one per active modality), a fusion MLP,
// and three lookahead heads: arm deltas, base twist, and a per-step
// terminate probability. Head outputs live in limit-normalized action units.
//
// In rgbd mode the fusion runs over all ordered (rgb variant, depth variant)
// embedding pairs; single-modality and channel-wise modes fuse one embedding
// per variant.

enum class PolicyModality { kRgb, kDepth, kRgbd };

inline const char* to_string(PolicyModality m) {
  switch (m) {
    case PolicyModality::kRgb: return "rgb";
    case PolicyModality::kDepth: return "depth";
    default: return "rgbd";
  }
}

inline PolicyModality parse_policy_modality(const std::string& s) {
  if (s == "rgb") return PolicyModality::kRgb;
  if (s == "depth") return PolicyModality::kDepth;
  if (s == "rgbd") return PolicyModality::kRgbd;
  throw ConfigError("unknown policy modality: " + s);
}

struct PolicyConfig {
  int height = 64;
  int width = 64;
  int base_width = 8;  // first conv width; stages use 2x/3x/4x
  int embed_dim = 64;  // per-modality embedding
  int fused_dim = 32;  // shared embedding after the fusion MLP
  int fusion_hidden = 64;
  int lookahead = 10;
  int arm_dof = 3;
  double depth_clip = 10.0;
  double l2_eps = 1e-6;
  double terminate_threshold = 0.5;
  PolicyModality modality = PolicyModality::kRgbd;
  // Ablation: stack depth as a fourth channel into one encoder instead of
  // pairing per-modality embeddings. Valid only with modality=rgbd.
  bool channelwise_fusion = false;

  int arm_out() const { return lookahead * arm_dof; }
  int base_out() const { return lookahead * 2; }

  bool uses_rgb() const { return modality != PolicyModality::kDepth; }
  bool uses_depth() const { return modality != PolicyModality::kRgb; }
  bool paired_fusion() const {
    return modality == PolicyModality::kRgbd && !channelwise_fusion;
  }
};

// Limits used to map physical actions to the [-1, 1] band the heads learn.
struct ActionScale {
  double v = 0.5;
  double yaw_rate = 0.8;
  double arm_delta = 0.08;

  static ActionScale from_world(const WorldConfig& w) {
    return ActionScale{w.v_limit, w.yaw_rate_limit, w.arm_delta_limit};
  }
};

template <typename S>
class PolicyNet {
 public:
  using Tape = nn::Tape<S>;
  using MatS = nn::Mat<S>;

  PolicyNet(PolicyConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    if (cfg_.channelwise_fusion && cfg_.modality != PolicyModality::kRgbd) {
      throw ConfigError("channelwise_fusion requires modality=rgbd");
    }
    Rng rng(seed_mix(init_seed, 0x9011C7));
    if (cfg_.channelwise_fusion) {
      build_encoder("rgbd", 4, rng);
    } else {
      if (cfg_.uses_rgb()) build_encoder("rgb", 3, rng);
      if (cfg_.uses_depth()) build_encoder("depth", 1, rng);
    }
    int fused_in = cfg_.paired_fusion() ? 2 * cfg_.embed_dim : cfg_.embed_dim;
    add_linear("fuse.l1", cfg_.fusion_hidden, fused_in, rng);
    add_linear("fuse.l2", cfg_.fused_dim, cfg_.fusion_hidden, rng);
    add_linear("head.arm", cfg_.arm_out(), cfg_.fused_dim, rng);
    add_linear("head.base", cfg_.base_out(), cfg_.fused_dim, rng);
    add_linear("head.term", cfg_.lookahead, cfg_.fused_dim, rng);
  }

  const PolicyConfig& config() const { return cfg_; }
  nn::ParamStore<S>& params() { return store_; }
  const nn::ParamStore<S>& params() const { return store_; }

  // ---- input packing; RGB scaled to [0,1], depth normalized by the clip ----

  MatS pack_rgb(const std::vector<const Frame*>& frames) const {
    check_frames(frames);
    MatS m(3 * cfg_.height * cfg_.width,
           static_cast<Eigen::Index>(frames.size()));
    for (std::size_t n = 0; n < frames.size(); ++n) {
      const RgbImage& img = frames[n]->rgb;
      Eigen::Index r = 0;
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < cfg_.height; ++y) {
          for (int x = 0; x < cfg_.width; ++x) {
            m(r++, static_cast<Eigen::Index>(n)) =
                static_cast<S>(img.at(y, x, c) / 255.0);
          }
        }
      }
    }
    return m;
  }

  MatS pack_depth(const std::vector<const Frame*>& frames) const {
    check_frames(frames);
    MatS m(cfg_.height * cfg_.width,
           static_cast<Eigen::Index>(frames.size()));
    for (std::size_t n = 0; n < frames.size(); ++n) {
      const DepthImage& img = frames[n]->depth;
      Eigen::Index r = 0;
      for (int y = 0; y < cfg_.height; ++y) {
        for (int x = 0; x < cfg_.width; ++x) {
          m(r++, static_cast<Eigen::Index>(n)) =
              static_cast<S>(img.at(y, x, 0) / cfg_.depth_clip);
        }
      }
    }
    return m;
  }

  // RGB in channels 0..2, normalized depth as channel 3.
  MatS pack_rgbd(const std::vector<const Frame*>& frames) const {
    check_frames(frames);
    int plane = cfg_.height * cfg_.width;
    MatS m(4 * plane, static_cast<Eigen::Index>(frames.size()));
    MatS rgb = pack_rgb(frames);
    MatS depth = pack_depth(frames);
    m.topRows(3 * plane) = rgb;
    m.bottomRows(plane) = depth;
    return m;
  }

  // ---- graph builders ----

  nn::Var encode(Tape& t, Modality modality, nn::Var x) {
    if (cfg_.channelwise_fusion) {
      throw ContractViolation(
          "encode: per-modality encoding unavailable in channelwise mode");
    }
    if (modality == Modality::kRgb && !cfg_.uses_rgb()) {
      throw ContractViolation("encode: rgb encoder absent in this policy");
    }
    if (modality == Modality::kDepth && !cfg_.uses_depth()) {
      throw ContractViolation("encode: depth encoder absent in this policy");
    }
    return encode_prefix(t, modality == Modality::kRgb ? "rgb" : "depth", x);
  }

  nn::Var encode_channelwise(Tape& t, nn::Var x) {
    if (!cfg_.channelwise_fusion) {
      throw ContractViolation("encode_channelwise: policy not channelwise");
    }
    return encode_prefix(t, "rgbd", x);
  }

  struct HeadOutputs {
    nn::Var embed;  // L2-normalized fused embedding
    nn::Var arm;    // (lookahead*arm_dof) x B, normalized units
    nn::Var base;   // (lookahead*2) x B, normalized units
    nn::Var term;   // lookahead x B, sigmoid probabilities
  };

  HeadOutputs fuse_pair(Tape& t, nn::Var rgb_emb, nn::Var depth_emb) {
    if (!cfg_.paired_fusion()) {
      throw ContractViolation("fuse_pair: policy is not in paired rgbd mode");
    }
    return fuse_from(t, t.concat_rows({rgb_emb, depth_emb}));
  }

  HeadOutputs fuse_single(Tape& t, nn::Var emb) {
    if (cfg_.paired_fusion()) {
      throw ContractViolation("fuse_single: paired rgbd mode needs a pair");
    }
    return fuse_from(t, emb);
  }

  // All ordered (rgb variant, depth variant) pairs; index r * n + d, so the
  // anchor pair (variant 1, variant 1) is entry 0.
  std::vector<HeadOutputs> fuse_all_pairs(
      Tape& t, const std::vector<nn::Var>& rgb_embs,
      const std::vector<nn::Var>& depth_embs) {
    if (rgb_embs.size() != depth_embs.size() || rgb_embs.empty()) {
      throw ContractViolation("fuse_all_pairs: variant lists disagree");
    }
    std::vector<HeadOutputs> outs;
    for (const nn::Var& r : rgb_embs) {
      for (const nn::Var& d : depth_embs) {
        outs.push_back(fuse_pair(t, r, d));
      }
    }
    return outs;
  }

  std::vector<HeadOutputs> fuse_all_single(Tape& t,
                                           const std::vector<nn::Var>& embs) {
    if (embs.empty()) {
      throw ContractViolation("fuse_all_single: no variant embeddings");
    }
    std::vector<HeadOutputs> outs;
    for (const nn::Var& e : embs) outs.push_back(fuse_single(t, e));
    return outs;
  }

  // Per-variant forward: one batch of frames per variant, shared weights.
  // Returns the N predictions in rgbd mode as N^2 fused pairs, otherwise N.
  struct ForwardResult {
    std::vector<nn::Var> rgb_embs;
    std::vector<nn::Var> depth_embs;
    std::vector<nn::Var> embs;  // single-modality or channelwise route
    std::vector<HeadOutputs> outputs;
  };

  ForwardResult forward_variants(
      Tape& t, const std::vector<std::vector<const Frame*>>& variants) {
    if (variants.empty()) {
      throw ContractViolation("forward_variants: empty variant set");
    }
    ForwardResult res;
    if (cfg_.paired_fusion()) {
      for (const auto& frames : variants) {
        res.rgb_embs.push_back(
            encode(t, Modality::kRgb, t.input(pack_rgb(frames))));
        res.depth_embs.push_back(
            encode(t, Modality::kDepth, t.input(pack_depth(frames))));
      }
      res.outputs = fuse_all_pairs(t, res.rgb_embs, res.depth_embs);
      return res;
    }
    for (const auto& frames : variants) {
      if (cfg_.channelwise_fusion) {
        res.embs.push_back(encode_channelwise(t, t.input(pack_rgbd(frames))));
      } else if (cfg_.modality == PolicyModality::kRgb) {
        res.embs.push_back(
            encode(t, Modality::kRgb, t.input(pack_rgb(frames))));
      } else {
        res.embs.push_back(
            encode(t, Modality::kDepth, t.input(pack_depth(frames))));
      }
    }
    res.outputs = fuse_all_single(t, res.embs);
    return res;
  }

  // Single-frame forward for control (inference is always N=1).
  HeadOutputs forward_single(Tape& t, const Frame& frame) {
    return forward_variants(t, {{&frame}}).outputs.front();
  }

  Action act(const Frame& frame, const ActionScale& scale) {
    Tape t;
    HeadOutputs out = forward_single(t, frame);
    const MatS& arm = t.val(out.arm);
    const MatS& base = t.val(out.base);
    const MatS& term = t.val(out.term);
    Action a = Action::zero(cfg_.arm_dof);
    for (int d = 0; d < cfg_.arm_dof; ++d) {
      a.arm[d] = static_cast<double>(arm(d, 0)) * scale.arm_delta;
    }
    a.base[0] = static_cast<double>(base(0, 0)) * scale.v;
    a.base[1] = static_cast<double>(base(1, 0)) * scale.yaw_rate;
    a.terminate = static_cast<double>(term(0, 0)) > cfg_.terminate_threshold;
    return a;
  }

  // ---- label packing (normalized units) ----

  MatS pack_arm_labels(const std::vector<const DemoLabel*>& ls,
                       const ActionScale& sc) const {
    MatS m(cfg_.arm_out(), static_cast<Eigen::Index>(ls.size()));
    for (std::size_t n = 0; n < ls.size(); ++n) {
      check_label(*ls[n]);
      for (int i = 0; i < cfg_.arm_out(); ++i) {
        m(i, static_cast<Eigen::Index>(n)) =
            static_cast<S>(ls[n]->arm[i] / sc.arm_delta);
      }
    }
    return m;
  }

  MatS pack_base_labels(const std::vector<const DemoLabel*>& ls,
                        const ActionScale& sc) const {
    MatS m(cfg_.base_out(), static_cast<Eigen::Index>(ls.size()));
    for (std::size_t n = 0; n < ls.size(); ++n) {
      check_label(*ls[n]);
      for (int k = 0; k < cfg_.lookahead; ++k) {
        m(2 * k + 0, static_cast<Eigen::Index>(n)) =
            static_cast<S>(ls[n]->base[2 * k + 0] / sc.v);
        m(2 * k + 1, static_cast<Eigen::Index>(n)) =
            static_cast<S>(ls[n]->base[2 * k + 1] / sc.yaw_rate);
      }
    }
    return m;
  }

  MatS pack_term_labels(const std::vector<const DemoLabel*>& ls) const {
    MatS m(cfg_.lookahead, static_cast<Eigen::Index>(ls.size()));
    for (std::size_t n = 0; n < ls.size(); ++n) {
      check_label(*ls[n]);
      for (int k = 0; k < cfg_.lookahead; ++k) {
        m(k, static_cast<Eigen::Index>(n)) =
            static_cast<S>(ls[n]->terminate[k]);
      }
    }
    return m;
  }

  void save(const std::string& path) const { nn::save_params(store_, path); }
  void load(const std::string& path) { nn::load_params(store_, path); }

 private:
  nn::Var encode_prefix(Tape& t, const std::string& prefix, nn::Var x) {
    int w = cfg_.base_width;
    int hh = cfg_.height, ww = cfg_.width;
    int in_c = prefix == "rgb" ? 3 : prefix == "depth" ? 1 : 4;
    nn::ConvSpec stem{in_c, hh, ww, w, 5, 5, 2, 2};
    nn::Var h = t.relu(conv(t, prefix + ".stem", x, stem));
    hh /= 2; ww /= 2;
    h = t.avg_pool2x2(h, w, hh, ww);
    hh /= 2; ww /= 2;
    int c_in = w;
    for (int stage = 0; stage < 3; ++stage) {
      int c_out = w * (stage + 2);
      std::string sp = prefix + ".s" + std::to_string(stage);
      nn::ConvSpec c1{c_in, hh, ww, c_out, 3, 3, 2, 1};
      nn::Var a = t.relu(conv(t, sp + ".c1", h, c1));
      int oh = c1.out_h(), ow2 = c1.out_w();
      nn::ConvSpec c2{c_out, oh, ow2, c_out, 3, 3, 1, 1};
      nn::Var b = conv(t, sp + ".c2", a, c2);
      nn::ConvSpec proj{c_in, hh, ww, c_out, 1, 1, 2, 0};
      nn::Var skip = conv(t, sp + ".proj", h, proj);
      h = t.relu(t.add(b, skip));
      hh = oh; ww = ow2; c_in = c_out;
    }
    h = t.global_avg_pool(h, c_in, hh * ww);
    // Projection then L2 normalization: every per-modality embedding is unit
    // length, which keeps the Huber consistency terms bounded.
    return t.l2_normalize_cols(linear(t, prefix + ".emb", h),
                               static_cast<S>(cfg_.l2_eps));
  }

  HeadOutputs fuse_from(Tape& t, nn::Var cat) {
    nn::Var h = t.relu(linear(t, "fuse.l1", cat));
    nn::Var fused = linear(t, "fuse.l2", h);
    nn::Var embed = t.l2_normalize_cols(fused, static_cast<S>(cfg_.l2_eps));
    HeadOutputs out;
    out.embed = embed;
    out.arm = linear(t, "head.arm", embed);
    out.base = linear(t, "head.base", embed);
    out.term = t.sigmoid(linear(t, "head.term", embed));
    return out;
  }

  void build_encoder(const std::string& prefix, int in_c, Rng& rng) {
    int w = cfg_.base_width;
    add_conv(prefix + ".stem", w, in_c * 5 * 5, rng);
    int c_in = w;
    for (int stage = 0; stage < 3; ++stage) {
      int c_out = w * (stage + 2);
      std::string sp = prefix + ".s" + std::to_string(stage);
      add_conv(sp + ".c1", c_out, c_in * 3 * 3, rng);
      add_conv(sp + ".c2", c_out, c_out * 3 * 3, rng);
      add_conv(sp + ".proj", c_out, c_in * 1 * 1, rng);
      c_in = c_out;
    }
    add_linear(prefix + ".emb", cfg_.embed_dim, c_in, rng);
  }

  void add_conv(const std::string& name, int out_c, int krows, Rng& rng) {
    nn::he_init(store_.add(name + ".w", out_c, krows), rng);
    store_.add(name + ".b", out_c, 1);
  }

  void add_linear(const std::string& name, int out, int in, Rng& rng) {
    nn::he_init(store_.add(name + ".w", out, in), rng);
    store_.add(name + ".b", out, 1);
  }

  nn::Var conv(Tape& t, const std::string& name, nn::Var x,
               const nn::ConvSpec& spec) {
    nn::Var w = t.param(store_.get(name + ".w"));
    nn::Var b = t.param(store_.get(name + ".b"));
    return t.conv2d(x, w, b, spec);
  }

  nn::Var linear(Tape& t, const std::string& name, nn::Var x) {
    nn::Var w = t.param(store_.get(name + ".w"));
    nn::Var b = t.param(store_.get(name + ".b"));
    return t.add_bias(t.matmul(w, x), b);
  }

  void check_frames(const std::vector<const Frame*>& frames) const {
    if (frames.empty()) throw ContractViolation("pack: empty frame batch");
    for (const Frame* f : frames) {
      if (f->rgb.height != cfg_.height || f->rgb.width != cfg_.width ||
          f->depth.height != cfg_.height || f->depth.width != cfg_.width) {
        throw ContractViolation("pack: frame resolution disagrees");
      }
    }
  }

  void check_label(const DemoLabel& l) const {
    if (l.lookahead != cfg_.lookahead || l.arm_dof != cfg_.arm_dof) {
      throw ContractViolation("pack: label shape disagrees with policy");
    }
  }

  PolicyConfig cfg_;
  nn::ParamStore<S> store_;
};

}  // namespace doorlab

#endif  // DOORLAB_POLICY_HPP_
