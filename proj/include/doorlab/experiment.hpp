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

#ifndef DOORLAB_EXPERIMENT_HPP_
#define DOORLAB_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "doorlab/data.hpp"
#include "doorlab/evalharness.hpp"
#include "doorlab/scene.hpp"
#include "doorlab/trainer.hpp"

namespace doorlab {

// Full study: collect one demonstration corpus on the train split, train
// every (method, seed) pair on it, sim-select the top checkpoints of each
// run, and compare sim-to-real gaps on the held-out eval split.

struct ExperimentConfig {
  std::vector<Method> methods{Method::kNaive, Method::kGanMix, Method::kTcl};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int sim_demos_per_scene = 40;
  int real_demos_per_scene = 160;
  std::uint64_t demo_seed = 4242;  // the demo corpus is shared by all runs
  int top_k = 3;
  int eval_workers = 1;
  TrainConfig train;       // method and seed are overridden per run
  ProtocolSpec protocol;   // scene_ids default to the eval split
  std::string out_dir = "experiment_out";
};

// One (method, seed) training run, summarized over its sim-selected
// checkpoints.
struct RunOutcome {
  Method method = Method::kNaive;
  std::uint64_t seed = 0;
  std::vector<std::string> top_ids;
  double mean_sim = 0.0;
  double mean_real = 0.0;
  double real_unseen = 0.0;  // pooled eval-split real success

  double gap() const { return mean_sim - mean_real; }
};

struct ExperimentOutcome {
  std::vector<RunOutcome> runs;

  const RunOutcome* find(Method m, std::uint64_t seed) const {
    for (const RunOutcome& r : runs) {
      if (r.method == m && r.seed == seed) return &r;
    }
    return nullptr;
  }

  // Seeds for which gap(tcl) < gap(gan_mix) < gap(naive) strictly.
  int ordering_seed_count(const std::vector<std::uint64_t>& seeds) const {
    int n = 0;
    for (std::uint64_t s : seeds) {
      const RunOutcome* tcl = find(Method::kTcl, s);
      const RunOutcome* gan = find(Method::kGanMix, s);
      const RunOutcome* naive = find(Method::kNaive, s);
      if (tcl && gan && naive && tcl->gap() < gan->gap() &&
          gan->gap() < naive->gap()) {
        ++n;
      }
    }
    return n;
  }

  double mean_gap(Method m) const {
    double sum = 0.0;
    int n = 0;
    for (const RunOutcome& r : runs) {
      if (r.method == m) {
        sum += r.gap();
        ++n;
      }
    }
    return n > 0 ? sum / n : 0.0;
  }

  double mean_real_unseen(Method m) const {
    double sum = 0.0;
    int n = 0;
    for (const RunOutcome& r : runs) {
      if (r.method == m) {
        sum += r.real_unseen;
        ++n;
      }
    }
    return n > 0 ? sum / n : 0.0;
  }
};

// The shared inputs of all runs: raw demos plus the precomputed adapted-sim
// copy that gan_mix mixes in.
struct DemoCorpus {
  EpisodeList sim;
  EpisodeList real;
  EpisodeList adapted_sim;
};

template <typename S>
DemoCorpus collect_corpus(const SceneRegistry& registry,
                          const ExperimentConfig& cfg,
                          const AdapterSet<S>& adapters,
                          std::ostream* log = nullptr) {
  std::vector<std::string> train_ids = registry.ids(Split::kTrain);
  DemoCorpus corpus;
  corpus.sim = share_episodes(
      collect(registry, train_ids, cfg.sim_demos_per_scene, Domain::kSim,
              seed_mix(cfg.demo_seed, 0x51), adapters.wcfg, adapters.rcfg));
  corpus.real = share_episodes(
      collect(registry, train_ids, cfg.real_demos_per_scene, Domain::kReal,
              seed_mix(cfg.demo_seed, 0x4E), adapters.wcfg, adapters.rcfg));
  if (log) {
    *log << "[demos] " << corpus.sim.size() << " sim + " << corpus.real.size()
         << " real episodes over " << train_ids.size() << " scenes\n";
  }
  bool wants_gan_mix = false;
  for (Method m : cfg.methods) wants_gan_mix |= m == Method::kGanMix;
  if (wants_gan_mix) {
    corpus.adapted_sim.reserve(corpus.sim.size());
    for (const auto& ep : corpus.sim) {
      corpus.adapted_sim.push_back(std::make_shared<const Episode>(
          adapt_episode(*ep, adapters, cfg.train.modality)));
    }
    if (log) {
      *log << "[demos] adapted " << corpus.adapted_sim.size()
           << " sim episodes for gan_mix\n";
    }
  }
  return corpus;
}

namespace detail {

inline double pooled_rate(const std::vector<EvalResult>& rows, Domain d,
                          bool unseen_only) {
  GroupStats st;
  for (const EvalResult& r : rows) {
    if (r.domain != d) continue;
    if (unseen_only && r.split != Split::kEval) continue;
    st.absorb(r);
  }
  return st.p();
}

}  // namespace detail

// One training run end to end: train, sim-evaluate every checkpoint from
// disk, keep the top_k by sim success, real-evaluate those, and report the
// run artifacts under run_dir.
template <typename S>
RunOutcome execute_run(const DemoCorpus& corpus, Method method,
                       std::uint64_t seed, const ExperimentConfig& cfg,
                       const SceneRegistry& registry,
                       const AdapterSet<S>& adapters,
                       const std::string& run_dir,
                       std::ostream* log = nullptr) {
  TrainConfig tc = cfg.train;
  tc.method = method;
  tc.seed = seed;
  Dataset ds = build_training_set(corpus.sim, corpus.real, tc, adapters,
                                  method == Method::kGanMix
                                      ? &corpus.adapted_sim
                                      : nullptr);
  if (log) {
    *log << "[train] " << to_string(method) << " seed=" << seed << " frames="
         << ds.frame_count() << " steps=" << tc.steps << "\n";
  }
  std::vector<CheckpointInfo> cps;
  {
    Trainer<S> trainer(tc, ds, adapters, run_dir);
    cps = trainer.run().checkpoints;
  }

  ProtocolSpec sim_proto = cfg.protocol;
  sim_proto.domains = {Domain::kSim};
  ProtocolSpec real_proto = cfg.protocol;
  real_proto.domains = {Domain::kReal};
  PolicyConfig pcfg = tc.resolved_policy();

  std::vector<EvalResult> rows;
  for (const CheckpointInfo& c : cps) {
    CheckpointRef ref{c.id, c.step, to_string(method), c.file};
    std::vector<EvalResult> r =
        evaluate_checkpoint_file<S>(ref, pcfg, registry, sim_proto,
                                    cfg.eval_workers, adapters.rcfg,
                                    adapters.wcfg);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::vector<std::string> top_ids = select_top_k(rows, cfg.top_k);
  for (const std::string& id : top_ids) {
    const CheckpointInfo* c = nullptr;
    for (const CheckpointInfo& it : cps) {
      if (it.id == id) c = &it;
    }
    CheckpointRef ref{c->id, c->step, to_string(method), c->file};
    std::vector<EvalResult> r =
        evaluate_checkpoint_file<S>(ref, pcfg, registry, real_proto,
                                    cfg.eval_workers, adapters.rcfg,
                                    adapters.wcfg);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  write_results_tsv(rows, run_dir + "/results.tsv");

  // The gap artifacts cover the checkpoints that carry both domains, which
  // is exactly the sim-selected set.
  std::vector<EvalResult> selected;
  for (const EvalResult& r : rows) {
    for (const std::string& id : top_ids) {
      if (r.checkpoint_id == id) {
        selected.push_back(r);
        break;
      }
    }
  }
  GapReport rep = gap_report(selected, cfg.top_k);
  write_gap_curve(rep, run_dir + "/gap_curve.tsv");
  write_gap_report(rep, run_dir + "/gap_report.tsv");

  RunOutcome out;
  out.method = method;
  out.seed = seed;
  out.top_ids = top_ids;
  out.mean_sim = rep.per_method.at(0).mean_sim;
  out.mean_real = rep.per_method.at(0).mean_real;
  out.real_unseen = detail::pooled_rate(selected, Domain::kReal, true);
  if (log) {
    *log << "[eval] " << to_string(method) << " seed=" << seed << " sim="
         << out.mean_sim << " real=" << out.mean_real << " gap=" << out.gap()
         << "\n";
  }
  return out;
}

inline nlohmann::json to_json(const ExperimentOutcome& result,
                              const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const RunOutcome& r : result.runs) {
    j["runs"].push_back({{"method", to_string(r.method)},
                         {"seed", r.seed},
                         {"top_checkpoints", r.top_ids},
                         {"mean_sim", r.mean_sim},
                         {"mean_real", r.mean_real},
                         {"gap", r.gap()},
                         {"real_unseen", r.real_unseen}});
  }
  j["mean_gap"] = nlohmann::json::object();
  for (Method m : cfg.methods) {
    j["mean_gap"][to_string(m)] = result.mean_gap(m);
  }
  j["ordering_seed_count"] = result.ordering_seed_count(cfg.seeds);
  j["tcl_minus_naive_real_unseen_pp"] =
      (result.mean_real_unseen(Method::kTcl) -
       result.mean_real_unseen(Method::kNaive)) * 100.0;
  return j;
}

template <typename S>
ExperimentOutcome run_experiment(const ExperimentConfig& cfg,
                                 const SceneRegistry& registry,
                                 const RenderConfig& rcfg = RenderConfig{},
                                 const WorldConfig& wcfg = WorldConfig{},
                                 std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  registry.validate_canonical();
  fs::create_directories(cfg.out_dir);

  AdapterSet<S> adapters;
  adapters.kind = cfg.train.adapter_kind;
  adapters.registry = &registry;
  adapters.rcfg = rcfg;
  adapters.wcfg = wcfg;

  ExperimentConfig resolved = cfg;
  if (resolved.protocol.scene_ids.empty()) {
    resolved.protocol.scene_ids = registry.ids(Split::kEval);
  }

  DemoCorpus corpus = collect_corpus(registry, resolved, adapters, log);
  ExperimentOutcome result;
  for (std::uint64_t seed : resolved.seeds) {
    for (Method method : resolved.methods) {
      std::string run_dir = resolved.out_dir + "/" + to_string(method) +
                            "_s" + std::to_string(seed);
      fs::create_directories(run_dir);
      result.runs.push_back(execute_run(corpus, method, seed, resolved,
                                        registry, adapters, run_dir, log));
    }
  }

  std::ofstream os(resolved.out_dir + "/summary.json", std::ios::trunc);
  if (!os) throw Error("run_experiment: cannot write summary.json");
  os << to_json(result, resolved).dump(2) << "\n";
  return result;
}

}  // namespace doorlab

#endif  // DOORLAB_EXPERIMENT_HPP_
