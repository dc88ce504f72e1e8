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

#ifndef DOORLAB_TRAINER_HPP_
#define DOORLAB_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "doorlab/adapt.hpp"
#include "doorlab/cyclegan.hpp"
#include "doorlab/data.hpp"
#include "doorlab/losses.hpp"
#include "doorlab/policy.hpp"
#include "doorlab/scene.hpp"

namespace doorlab {

// Training loop: draws frame batches, builds the N variants per frame,
// routes the adapter by origin domain, and optimizes cloning plus (for the
// tcl method) the consistency terms. Checkpoints on a fixed step cadence.

enum class Optimizer { kAdam, kSgd };
enum class AdapterKind { kOracle, kCyclegan };
enum class Method { kNaive, kGanMix, kTcl };

inline const char* to_string(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "sgd";
}
inline const char* to_string(AdapterKind k) {
  return k == AdapterKind::kOracle ? "oracle" : "cyclegan";
}
inline const char* to_string(Method m) {
  switch (m) {
    case Method::kNaive: return "naive";
    case Method::kGanMix: return "gan_mix";
    default: return "tcl";
  }
}

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "sgd") return Optimizer::kSgd;
  throw ConfigError("unknown optimizer: " + s);
}
inline AdapterKind parse_adapter_kind(const std::string& s) {
  if (s == "oracle") return AdapterKind::kOracle;
  if (s == "cyclegan") return AdapterKind::kCyclegan;
  throw ConfigError("unknown adapter kind: " + s);
}
inline Method parse_method(const std::string& s) {
  if (s == "naive") return Method::kNaive;
  if (s == "gan_mix") return Method::kGanMix;
  if (s == "tcl") return Method::kTcl;
  throw ConfigError("unknown method: " + s);
}

struct TrainConfig {
  int batch_size = 8;
  double learning_rate = 3e-4;
  Optimizer optimizer = Optimizer::kAdam;
  int steps = 200;
  int checkpoint_interval_steps = 500;
  int n_variants = 3;  // N of Eq. 1/2; methods other than tcl train with 1
  PolicyModality modality = PolicyModality::kRgbd;
  AdapterKind adapter_kind = AdapterKind::kOracle;
  Method method = Method::kTcl;
  std::uint64_t seed = 0;
  PolicyConfig policy;      // modality field is overwritten from the above
  AugmentConfig augment;
  double grad_clip = 10.0;

  PolicyConfig resolved_policy() const {
    PolicyConfig p = policy;
    p.modality = modality;
    return p;
  }
};

inline std::string config_hash(const TrainConfig& c) {
  PolicyConfig p = c.resolved_policy();
  std::string s;
  s += std::to_string(c.batch_size) + "," + std::to_string(c.learning_rate) +
       "," + to_string(c.optimizer) + "," + std::to_string(c.steps) + "," +
       std::to_string(c.checkpoint_interval_steps) + "," +
       std::to_string(c.n_variants) + "," + to_string(c.modality) + "," +
       to_string(c.adapter_kind) + "," + to_string(c.method) + "," +
       std::to_string(c.seed) + ";";
  s += std::to_string(p.base_width) + "," + std::to_string(p.embed_dim) +
       "," + std::to_string(p.fused_dim) + "," +
       std::to_string(p.fusion_hidden) + "," + std::to_string(p.lookahead) +
       "," + std::to_string(p.arm_dof) + "," + std::to_string(p.depth_clip) +
       "," + std::to_string(p.channelwise_fusion ? 1 : 0) + ";";
  const AugmentConfig& a = c.augment;
  s += std::to_string(a.crop_fraction) + "," + std::to_string(a.brightness_lo) +
       "," + std::to_string(a.brightness_hi) + "," +
       std::to_string(a.saturation_lo) + "," + std::to_string(a.saturation_hi) +
       "," + std::to_string(a.hue_delta) + "," + std::to_string(a.contrast_lo) +
       "," + std::to_string(a.contrast_hi) + "," +
       std::to_string(a.cutout_count) + "," + std::to_string(a.cutout_max) +
       "," + std::to_string(a.gaussian_sigma);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_str(s)));
  return std::string(buf);
}

// Identifies the training data a run consumed; folded from per-episode
// provenance, not file bytes, so it is stable across storage layout.
inline std::string dataset_signature(const Dataset& ds) {
  std::uint64_t h = 14695981039346656037ULL;
  auto fold = [&h](std::uint64_t v) {
    h = seed_mix(h, v);
  };
  fold(static_cast<std::uint64_t>(ds.episode_count()));
  for (int e = 0; e < static_cast<int>(ds.episode_count()); ++e) {
    const Episode& ep = ds.episode(e);
    fold(hash_str(ep.scene_id));
    fold(ep.seed);
    fold(static_cast<std::uint64_t>(ep.frames.size()));
    fold(ep.domain == Domain::kSim ? 0u : 1u);
    fold(ds.adapted(e) ? 1u : 0u);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Adapter routing.

// The adapters a training run may invoke. Oracle needs the scene registry
// (re-render); cyclegan needs per-modality generator pairs.
template <typename S>
struct AdapterSet {
  AdapterKind kind = AdapterKind::kOracle;
  const SceneRegistry* registry = nullptr;
  RenderConfig rcfg;
  WorldConfig wcfg;
  const Generator<S>* rgb_sim2real = nullptr;
  const Generator<S>* rgb_real2sim = nullptr;
  const Generator<S>* depth_sim2real = nullptr;
  const Generator<S>* depth_real2sim = nullptr;

  const Generator<S>* pick(Modality m, AdaptDirection d) const {
    if (m == Modality::kRgb) {
      return d == AdaptDirection::kSim2Real ? rgb_sim2real : rgb_real2sim;
    }
    return d == AdaptDirection::kSim2Real ? depth_sim2real : depth_real2sim;
  }
};

template <typename S>
Frame adapt_frame(const Observation& obs, const AdapterSet<S>& ad,
                  PolicyModality need) {
  AdaptDirection dir = direction_for(obs.domain);
  if (ad.kind == AdapterKind::kOracle) {
    if (ad.registry == nullptr || !ad.registry->contains(obs.scene_id)) {
      throw ConfigError("adapter unavailable: oracle needs the scene registry");
    }
    return adapt_oracle(obs, dir, *ad.registry, ad.rcfg, ad.wcfg).frame;
  }
  Frame out = obs.frame;
  bool rgb = need != PolicyModality::kDepth;
  bool depth = need != PolicyModality::kRgb;
  if (rgb) {
    const Generator<S>* g = ad.pick(Modality::kRgb, dir);
    if (g == nullptr) throw ConfigError("adapter unavailable for rgb");
    out.rgb = adapt_learned(obs.frame.rgb, *g);
  }
  if (depth) {
    const Generator<S>* g = ad.pick(Modality::kDepth, dir);
    if (g == nullptr) throw ConfigError("adapter unavailable for depth");
    out.depth = adapt_learned(obs.frame.depth, *g);
  }
  return out;
}

struct VariantSet {
  std::vector<Frame> frames;  // I1..IN; I3+ pass through the adapter
};

// The Fig. 3 variant recipe: I1 = D(I), I2 = D(I) with an independent seed,
// I3.. = D(G(I)) where G runs sim2real on sim-origin frames and real2sim on
// real-origin frames.
template <typename S>
VariantSet make_variants(const Observation& obs, int n,
                         std::uint64_t base_seed, const AugmentConfig& acfg,
                         const AdapterSet<S>& ad, PolicyModality need) {
  if (n < 1) throw ContractViolation("make_variants: n must be >= 1");
  VariantSet vs;
  if (n >= 3) {
    Frame adapted = adapt_frame(obs, ad, need);
    vs.frames = make_variants_from(obs.frame, &adapted, n, base_seed, acfg);
  } else {
    vs.frames = make_variants_from(obs.frame, nullptr, n, base_seed, acfg);
  }
  return vs;
}

// Whole-episode adaptation used by gan_mix dataset expansion: every frame
// is translated once, the state/action stream is kept, the domain flips.
template <typename S>
Episode adapt_episode(const Episode& ep, const AdapterSet<S>& ad,
                      PolicyModality need) {
  Episode out = ep;
  out.domain = other_domain(ep.domain);
  for (std::size_t i = 0; i < ep.frames.size(); ++i) {
    out.frames[i].frame =
        adapt_frame(observation_at(ep, static_cast<int>(i)), ad, need);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset assembly per method.

using EpisodeList = std::vector<std::shared_ptr<const Episode>>;

inline EpisodeList share_episodes(std::vector<Episode> eps) {
  EpisodeList out;
  out.reserve(eps.size());
  for (Episode& ep : eps) {
    out.push_back(std::make_shared<const Episode>(std::move(ep)));
  }
  return out;
}

// naive: raw sim + real frames. gan_mix: the same plus a sim2real-adapted
// copy of every sim episode; callers that build several gan_mix datasets can
// precompute that copy once and pass it as adapted_sim. tcl: the naive
// composition; variants are built per step instead.
template <typename S>
Dataset build_training_set(const EpisodeList& sim_eps,
                           const EpisodeList& real_eps,
                           const TrainConfig& cfg,
                           const AdapterSet<S>& adapters,
                           const EpisodeList* adapted_sim = nullptr) {
  if (cfg.method == Method::kTcl && (sim_eps.empty() || real_eps.empty())) {
    throw ConfigError("method=tcl needs both sim and real datasets");
  }
  if (sim_eps.empty() && real_eps.empty()) {
    throw ConfigError("build_training_set: no episodes");
  }
  PolicyConfig p = cfg.resolved_policy();
  Dataset ds(p.lookahead, p.arm_dof);
  for (const auto& ep : sim_eps) {
    if (ep->domain != Domain::kSim) {
      throw ContractViolation("build_training_set: sim list has a real episode");
    }
    ds.add(ep);
  }
  for (const auto& ep : real_eps) {
    if (ep->domain != Domain::kReal) {
      throw ContractViolation("build_training_set: real list has a sim episode");
    }
    ds.add(ep);
  }
  if (cfg.method == Method::kGanMix) {
    if (adapted_sim != nullptr) {
      if (adapted_sim->size() != sim_eps.size()) {
        throw ContractViolation(
            "build_training_set: adapted_sim count does not match sim count");
      }
      for (const auto& ep : *adapted_sim) {
        if (ep->domain != Domain::kReal) {
          throw ContractViolation(
              "build_training_set: adapted_sim episode is not real-domain");
        }
        ds.add(ep, /*adapted=*/true);
      }
    } else {
      for (const auto& ep : sim_eps) {
        ds.add(adapt_episode(*ep, adapters, cfg.modality), /*adapted=*/true);
      }
    }
  }
  return ds;
}

template <typename S>
Dataset build_training_set(const std::vector<Episode>& sim_eps,
                           const std::vector<Episode>& real_eps,
                           const TrainConfig& cfg,
                           const AdapterSet<S>& adapters) {
  return build_training_set(share_episodes(sim_eps), share_episodes(real_eps),
                            cfg, adapters);
}

// ---------------------------------------------------------------------------
// The loop.

struct StepRecord {
  int step = 0;
  double lr = 0.0;
  losses::LossReport report;
  // The raw frames this step consumed, for batch auditing. Depends only on
  // (dataset, seed, step), never on the training method.
  std::vector<Dataset::SampleRef> refs;
};

inline nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step},
          {"lr", r.lr},
          {"tcl_embed", r.report.tcl_embed},
          {"tcl_action", r.report.tcl_action},
          {"bcl_arm", r.report.bcl_arm},
          {"bcl_base", r.report.bcl_base},
          {"bcl_term", r.report.bcl_term},
          {"total", r.report.total}};
}

struct CheckpointInfo {
  std::string id;
  int step = 0;  // completed optimization steps at save time
  std::string file;
};

template <typename S>
struct TrainResult {
  PolicyNet<S> policy;
  std::vector<StepRecord> log;
  std::vector<CheckpointInfo> checkpoints;
};

template <typename S>
class Trainer {
 public:
  Trainer(TrainConfig cfg, const Dataset& ds, AdapterSet<S> adapters,
          std::string run_dir = "")
      : cfg_(std::move(cfg)),
        ds_(ds),
        adapters_(std::move(adapters)),
        run_dir_(std::move(run_dir)),
        policy_(cfg_.resolved_policy(), seed_mix(cfg_.seed, 0x90)),
        scale_(ActionScale::from_world(adapters_.wcfg)) {
    if (cfg_.batch_size <= 0 || cfg_.steps < 0) {
      throw ConfigError("Trainer: batch_size/steps out of range");
    }
    if (cfg_.method == Method::kTcl) {
      if (ds_.frame_count(Domain::kSim, false) == 0 ||
          ds_.frame_count(Domain::kReal, false) == 0) {
        throw ConfigError("method=tcl needs both sim and real frames");
      }
      if (cfg_.n_variants < 3) {
        throw ConfigError("method=tcl needs n_variants >= 3");
      }
    }
    if (cfg_.optimizer == Optimizer::kAdam) {
      nn::AdamConfig<S> ac;
      ac.lr = static_cast<S>(cfg_.learning_rate);
      ac.clip_norm = static_cast<S>(cfg_.grad_clip);
      opt_.template emplace<nn::Adam<S>>(ac);
    } else {
      opt_.template emplace<nn::Sgd<S>>(static_cast<S>(cfg_.learning_rate),
                                        static_cast<S>(cfg_.grad_clip));
    }
  }

  PolicyNet<S>& policy() { return policy_; }

  // One optimization step at 0-based index `step`. The raw frame draw
  // depends only on (seed, step), so every method sees the same frames.
  StepRecord step(int step_index) {
    std::vector<Dataset::SampleRef> refs =
        sample_refs(ds_, cfg_.batch_size, seed_mix(cfg_.seed, step_index,
                                                   0x57E9));
    int n = cfg_.method == Method::kTcl ? cfg_.n_variants : 1;
    std::size_t batch = refs.size();
    std::vector<Observation> obs;
    std::vector<const DemoLabel*> labels;
    obs.reserve(batch);
    labels.reserve(batch);
    for (const Dataset::SampleRef& r : refs) {
      obs.push_back(ds_.observation(r));
      labels.push_back(&ds_.label(r));
    }

    std::vector<std::vector<Frame>> vf(static_cast<std::size_t>(n));
    for (auto& v : vf) v.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      VariantSet vs = make_variants(
          obs[b], n, seed_mix(cfg_.seed, step_index, b, 0x7AC1),
          cfg_.augment, adapters_, cfg_.modality);
      for (int i = 0; i < n; ++i) {
        vf[static_cast<std::size_t>(i)][b] =
            std::move(vs.frames[static_cast<std::size_t>(i)]);
      }
    }
    std::vector<std::vector<const Frame*>> vp(vf.size());
    for (std::size_t i = 0; i < vf.size(); ++i) {
      vp[i].reserve(batch);
      for (const Frame& f : vf[i]) vp[i].push_back(&f);
    }

    typename PolicyNet<S>::Tape t;
    auto fwd = policy_.forward_variants(t, vp);
    nn::Var arm_l = t.input(policy_.pack_arm_labels(labels, scale_));
    nn::Var base_l = t.input(policy_.pack_base_labels(labels, scale_));
    nn::Var term_l = t.input(policy_.pack_term_labels(labels));
    std::vector<std::size_t> supervised =
        policy_.config().paired_fusion()
            ? losses::diagonal_indices(fwd.outputs.size(),
                                       static_cast<std::size_t>(n))
            : losses::all_indices(fwd.outputs.size());
    auto graph = losses::build_losses(t, fwd, supervised, arm_l, base_l,
                                      term_l, cfg_.method == Method::kTcl);
    StepRecord rec;
    rec.step = step_index;
    rec.lr = cfg_.learning_rate;
    rec.refs = refs;
    rec.report = losses::report_from(t, graph);
    if (!std::isfinite(rec.report.total)) {
      abort_with_batch(step_index, refs);
    }
    policy_.params().zero_grads();
    t.backward(graph.total);
    if (auto* adam = std::get_if<nn::Adam<S>>(&opt_)) {
      adam->step(policy_.params());
    } else {
      std::get<nn::Sgd<S>>(opt_).step(policy_.params());
    }
    return rec;
  }

  TrainResult<S> run() {
    std::ofstream log_out;
    if (!run_dir_.empty()) {
      std::filesystem::create_directories(run_dir_);
      log_out.open(run_dir_ + "/train_log.jsonl");
    }
    std::vector<StepRecord> log;
    std::vector<CheckpointInfo> cps;
    log.reserve(static_cast<std::size_t>(cfg_.steps));
    for (int s = 0; s < cfg_.steps; ++s) {
      StepRecord rec = step(s);
      if (log_out.is_open()) log_out << to_json(rec).dump() << "\n";
      log.push_back(rec);
      int done = s + 1;
      if (cfg_.checkpoint_interval_steps > 0 &&
          done % cfg_.checkpoint_interval_steps == 0) {
        cps.push_back(save_checkpoint(done));
      }
    }
    if (cfg_.steps > 0 &&
        (cps.empty() || cps.back().step != cfg_.steps)) {
      cps.push_back(save_checkpoint(cfg_.steps));
    }
    write_manifest(cps);
    return TrainResult<S>{std::move(policy_), std::move(log), std::move(cps)};
  }

 private:
  CheckpointInfo save_checkpoint(int done_steps) {
    char tag[32];
    std::snprintf(tag, sizeof tag, "%06d", done_steps);
    CheckpointInfo info;
    info.id = "ckpt_step" + std::string(tag);
    info.step = done_steps;
    if (run_dir_.empty()) return info;
    info.file = run_dir_ + "/" + info.id + ".params";
    policy_.save(info.file);
    nlohmann::json meta = {{"id", info.id},
                           {"step", info.step},
                           {"config_hash", config_hash(cfg_)},
                           {"dataset_hash", dataset_signature(ds_)}};
    std::ofstream out(info.file + ".meta.json");
    out << meta.dump(2) << "\n";
    return info;
  }

  void write_manifest(const std::vector<CheckpointInfo>& cps) {
    if (run_dir_.empty()) return;
    nlohmann::json arr = nlohmann::json::array();
    for (const CheckpointInfo& c : cps) {  // already in step order
      arr.push_back({{"id", c.id}, {"step", c.step}, {"file", c.file}});
    }
    nlohmann::json manifest = {{"method", to_string(cfg_.method)},
                               {"modality", to_string(cfg_.modality)},
                               {"seed", cfg_.seed},
                               {"config_hash", config_hash(cfg_)},
                               {"dataset_hash", dataset_signature(ds_)},
                               {"checkpoints", arr}};
    std::ofstream out(run_dir_ + "/checkpoints.json");
    out << manifest.dump(2) << "\n";
  }

  [[noreturn]] void abort_with_batch(int step_index,
                                     const std::vector<Dataset::SampleRef>& refs) {
    std::string where = "<not saved: no run dir>";
    if (!run_dir_.empty()) {
      nlohmann::json batch = nlohmann::json::array();
      for (const Dataset::SampleRef& r : refs) {
        const Episode& ep = ds_.episode(r.entry);
        batch.push_back({{"scene_id", ep.scene_id},
                         {"episode_seed", ep.seed},
                         {"domain", to_string(ep.domain)},
                         {"adapted", ds_.adapted(r.entry)},
                         {"frame", r.frame}});
      }
      nlohmann::json diag = {{"step", step_index},
                             {"seed", cfg_.seed},
                             {"batch", batch}};
      where = run_dir_ + "/nan_batch_step" + std::to_string(step_index) +
              ".json";
      std::ofstream out(where);
      out << diag.dump(2) << "\n";
    }
    throw TrainingError("train: NaN loss at step " +
                        std::to_string(step_index) + "; offending batch: " +
                        where);
  }

  TrainConfig cfg_;
  const Dataset& ds_;
  AdapterSet<S> adapters_;
  std::string run_dir_;
  PolicyNet<S> policy_;
  ActionScale scale_;
  std::variant<std::monostate, nn::Adam<S>, nn::Sgd<S>> opt_;
};

// Convenience wrapper: assemble per-method data and run the loop.
template <typename S>
TrainResult<S> train(const std::vector<Episode>& sim_eps,
                     const std::vector<Episode>& real_eps,
                     const TrainConfig& cfg, const AdapterSet<S>& adapters,
                     const std::string& run_dir = "") {
  Dataset ds = build_training_set(sim_eps, real_eps, cfg, adapters);
  Trainer<S> tr(cfg, ds, adapters, run_dir);
  return tr.run();
}

}  // namespace doorlab

#endif  // DOORLAB_TRAINER_HPP_
