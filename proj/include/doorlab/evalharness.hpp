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

#ifndef DOORLAB_EVALHARNESS_HPP_
#define DOORLAB_EVALHARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "doorlab/policy.hpp"
#include "doorlab/render.hpp"
#include "doorlab/scene.hpp"
#include "doorlab/world.hpp"

namespace doorlab {

// Success-rate evaluation over the Table-1-style protocol. Each trial's
// seed is a pure function of the evaluation seed, the scene id, and the
// trial index, so reports are identical regardless of worker-pool size.
//
// "Real" here is the real-style rendered domain, this artifact's reality
// analog; every report file carries that caveat in its header.

struct ProtocolSpec {
  std::vector<std::string> scene_ids;
  int trials_per_scene = 6;
  std::vector<Domain> domains{Domain::kSim, Domain::kReal};
  std::uint64_t seed = 99;
};

// Identity a row is reported under; step and method come from the training
// manifest, not the weights file.
struct CheckpointRef {
  std::string id;
  int step = 0;
  std::string method;
  std::string file;
};

struct RolloutOutcome {
  bool success = false;
  bool policy_terminated = false;
  int steps = 0;
  FailureReason failure_reason = FailureReason::kNone;
};

// Binomial standard deviation of a success rate (fraction, not percent).
inline double success_stddev(double p, int n) {
  if (n < 2) throw ContractViolation("success_stddev: needs n >= 2");
  return std::sqrt(p * (1.0 - p) / (n - 1));
}

// One (checkpoint, domain, scene) cell of the protocol.
struct EvalResult {
  std::string checkpoint_id;
  std::string method;
  int step = 0;
  Domain domain = Domain::kSim;
  std::string scene_id;
  Split split = Split::kTrain;
  Swing swing = Swing::kLeft;
  bool lighting_on = true;
  DynamicsVariant variant = DynamicsVariant::kA;
  int n = 0;
  int k = 0;

  double p() const { return n > 0 ? static_cast<double>(k) / n : 0.0; }
  double stddev() const { return success_stddev(p(), n); }
};

inline std::uint64_t trial_seed(std::uint64_t eval_seed,
                                const std::string& scene_id, int trial) {
  return seed_mix(eval_seed, hash_str(scene_id),
                  static_cast<std::uint64_t>(trial), 0xE7A1);
}

// Rolls the policy from a seeded reset until it terminates, the world
// fails, or the world timeout fires. Success requires both a successful
// end state and an explicit terminate from the policy.
template <typename S>
RolloutOutcome rollout(PolicyNet<S>& policy, const SceneSpec& scene,
                       Domain domain, std::uint64_t seed,
                       const RenderConfig& rcfg = RenderConfig{},
                       const WorldConfig& wcfg = WorldConfig{}) {
  RolloutOutcome res;
  ActionScale scale = ActionScale::from_world(wcfg);
  WorldState s = reset(scene, seed, wcfg);
  for (int t = 0; t < wcfg.timeout_steps; ++t) {
    Frame frame = render(s, scene, domain,
                         seed_mix(seed, static_cast<std::uint64_t>(t), 0xF8),
                         rcfg, wcfg);
    Action a = policy.act(frame, scale);
    res.steps = t + 1;
    if (a.terminate) {
      res.policy_terminated = true;
      res.success = is_success(s, scene, wcfg);
      return res;
    }
    s = step(s, a, scene, wcfg);
    if (s.failed) {
      res.failure_reason = s.failure_reason;
      return res;
    }
  }
  res.failure_reason = FailureReason::kTimeout;
  return res;
}

// All (domain x scene x trial) rollouts of one checkpoint, executed by a
// worker pool. Jobs are seeded by trial index, and each worker runs a
// read-only copy of the policy, so the result set is pool-size invariant.
template <typename S>
std::vector<EvalResult> evaluate_checkpoint(
    const PolicyNet<S>& policy, const CheckpointRef& meta,
    const SceneRegistry& registry, const ProtocolSpec& protocol, int workers,
    const RenderConfig& rcfg = RenderConfig{},
    const WorldConfig& wcfg = WorldConfig{}) {
  if (workers < 1) throw ConfigError("evaluate_checkpoint: workers >= 1");
  if (protocol.trials_per_scene < 1) {
    throw ConfigError("evaluate_checkpoint: trials_per_scene >= 1");
  }
  struct Job {
    std::size_t cell;  // index into the result rows
    const SceneSpec* scene;
    Domain domain;
    int trial;
  };
  std::vector<EvalResult> rows;
  std::vector<Job> jobs;
  for (Domain d : protocol.domains) {
    for (const std::string& id : protocol.scene_ids) {
      const SceneSpec& scene = registry.get(id);
      EvalResult row;
      row.checkpoint_id = meta.id;
      row.method = meta.method;
      row.step = meta.step;
      row.domain = d;
      row.scene_id = id;
      row.split = scene.split;
      row.swing = scene.swing;
      row.lighting_on = scene.lighting_on;
      row.variant = scene.dynamics_variant;
      row.n = protocol.trials_per_scene;
      std::size_t cell = rows.size();
      rows.push_back(row);
      for (int k = 0; k < protocol.trials_per_scene; ++k) {
        jobs.push_back(Job{cell, &scene, d, k});
      }
    }
  }

  std::vector<unsigned char> success(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&]() {
    PolicyNet<S> local = policy;  // read-only copy per worker
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const Job& j = jobs[i];
        std::uint64_t seed =
            trial_seed(protocol.seed, j.scene->scene_id, j.trial);
        RolloutOutcome out =
            rollout(local, *j.scene, j.domain, seed, rcfg, wcfg);
        success[i] = out.success ? 1 : 0;
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    rows[jobs[i].cell].k += success[i];
  }
  return rows;
}

// Loads the weights first; a load failure is reported with the checkpoint
// identity rather than a bare file error.
template <typename S>
std::vector<EvalResult> evaluate_checkpoint_file(
    const CheckpointRef& ckpt, const PolicyConfig& pcfg,
    const SceneRegistry& registry, const ProtocolSpec& protocol, int workers,
    const RenderConfig& rcfg = RenderConfig{},
    const WorldConfig& wcfg = WorldConfig{}) {
  PolicyNet<S> policy(pcfg, 0);
  try {
    policy.load(ckpt.file);
  } catch (const std::exception& e) {
    throw Error("evaluate_checkpoint: cannot load " + ckpt.id + " from " +
                ckpt.file + ": " + e.what());
  }
  return evaluate_checkpoint(policy, ckpt, registry, protocol, workers, rcfg,
                             wcfg);
}

// ---------------------------------------------------------------------------
// Aggregation.

struct GroupStats {
  int n = 0;
  int k = 0;

  void absorb(const EvalResult& r) {
    n += r.n;
    k += r.k;
  }
  double p() const { return n > 0 ? static_cast<double>(k) / n : 0.0; }
};

struct CheckpointGap {
  std::string checkpoint_id;
  std::string method;
  int step = 0;
  double sim_success = 0.0;
  double real_success = 0.0;
  double gap = 0.0;  // sim - real
};

struct MethodGap {
  std::string method;
  std::vector<std::string> top_ids;  // sim-selected, best first
  double mean_gap = 0.0;             // over the selected checkpoints
  double mean_sim = 0.0;
  double mean_real = 0.0;
};

struct BreakdownRow {
  std::string method;
  Domain domain = Domain::kSim;
  std::string axis;   // split | swing | lighting | variant | total
  std::string group;  // e.g. "train", "left", "on", "A"
  int n = 0;
  int k = 0;

  double p() const { return n > 0 ? static_cast<double>(k) / n : 0.0; }
};

struct GapReport {
  std::vector<CheckpointGap> per_checkpoint;  // step order within method
  std::vector<MethodGap> per_method;
  std::vector<BreakdownRow> breakdowns;  // over the selected checkpoints
};

// Sim-selection: k highest aggregate sim success, ties broken by the later
// training step. Errors when fewer than k checkpoints carry sim rows.
inline std::vector<std::string> select_top_k(
    const std::vector<EvalResult>& sim_results, int k) {
  if (k < 1) throw ContractViolation("select_top_k: k must be >= 1");
  struct Cand {
    std::string id;
    int step = 0;
    GroupStats stats;
  };
  std::vector<Cand> cands;
  for (const EvalResult& r : sim_results) {
    if (r.domain != Domain::kSim) continue;
    Cand* c = nullptr;
    for (Cand& it : cands) {
      if (it.id == r.checkpoint_id) c = &it;
    }
    if (!c) {
      cands.push_back(Cand{r.checkpoint_id, r.step, {}});
      c = &cands.back();
    }
    c->stats.absorb(r);
  }
  if (static_cast<int>(cands.size()) < k) {
    throw Error("select_top_k: only " + std::to_string(cands.size()) +
                " checkpoints with sim results, need " + std::to_string(k));
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.stats.p() != b.stats.p()) return a.stats.p() > b.stats.p();
    return a.step > b.step;
  });
  std::vector<std::string> ids;
  for (int i = 0; i < k; ++i) ids.push_back(cands[static_cast<std::size_t>(i)].id);
  return ids;
}

// Per-checkpoint sim/real aggregates, per-method top-k gap means, and the
// Table-2/3-style breakdowns over the selected checkpoints. Every
// checkpoint must carry rows for both domains.
inline GapReport gap_report(const std::vector<EvalResult>& results,
                            int top_k = 3) {
  GapReport rep;
  struct Acc {
    std::string method;
    int step = 0;
    GroupStats sim, real;
  };
  std::map<std::string, Acc> by_ckpt;
  for (const EvalResult& r : results) {
    Acc& a = by_ckpt[r.checkpoint_id];
    a.method = r.method;
    a.step = r.step;
    if (r.domain == Domain::kSim) {
      a.sim.absorb(r);
    } else {
      a.real.absorb(r);
    }
  }
  for (const auto& [id, a] : by_ckpt) {
    if (a.sim.n == 0 || a.real.n == 0) {
      throw IncompleteDataError("gap_report: checkpoint " + id +
                                " missing a domain");
    }
    CheckpointGap g;
    g.checkpoint_id = id;
    g.method = a.method;
    g.step = a.step;
    g.sim_success = a.sim.p();
    g.real_success = a.real.p();
    g.gap = g.sim_success - g.real_success;
    rep.per_checkpoint.push_back(g);
  }
  std::sort(rep.per_checkpoint.begin(), rep.per_checkpoint.end(),
            [](const CheckpointGap& a, const CheckpointGap& b) {
              if (a.method != b.method) return a.method < b.method;
              return a.step < b.step;
            });

  std::vector<std::string> methods;
  for (const CheckpointGap& g : rep.per_checkpoint) {
    if (std::find(methods.begin(), methods.end(), g.method) == methods.end()) {
      methods.push_back(g.method);
    }
  }
  for (const std::string& m : methods) {
    std::vector<EvalResult> sim_rows;
    int available = 0;
    for (const CheckpointGap& g : rep.per_checkpoint) {
      if (g.method == m) available += 1;
    }
    for (const EvalResult& r : results) {
      if (r.method == m) sim_rows.push_back(r);
    }
    int k = std::min(top_k, available);
    MethodGap mg;
    mg.method = m;
    mg.top_ids = select_top_k(sim_rows, k);
    for (const std::string& id : mg.top_ids) {
      for (const CheckpointGap& g : rep.per_checkpoint) {
        if (g.checkpoint_id == id) {
          mg.mean_gap += g.gap;
          mg.mean_sim += g.sim_success;
          mg.mean_real += g.real_success;
        }
      }
    }
    mg.mean_gap /= static_cast<double>(k);
    mg.mean_sim /= static_cast<double>(k);
    mg.mean_real /= static_cast<double>(k);
    rep.per_method.push_back(mg);

    // Breakdowns pool the selected checkpoints' rows per axis group.
    for (Domain d : {Domain::kSim, Domain::kReal}) {
      std::map<std::string, std::map<std::string, GroupStats>> axes;
      for (const EvalResult& r : results) {
        if (r.method != m || r.domain != d) continue;
        if (std::find(mg.top_ids.begin(), mg.top_ids.end(),
                      r.checkpoint_id) == mg.top_ids.end()) {
          continue;
        }
        axes["total"]["all"].absorb(r);
        axes["split"][to_string(r.split)].absorb(r);
        axes["swing"][to_string(r.swing)].absorb(r);
        axes["lighting"][r.lighting_on ? "on" : "off"].absorb(r);
        axes["variant"][to_string(r.variant)].absorb(r);
      }
      for (const auto& [axis, groups] : axes) {
        for (const auto& [group, st] : groups) {
          rep.breakdowns.push_back(
              BreakdownRow{m, d, axis, group, st.n, st.k});
        }
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Report files.

inline constexpr const char* kRealDomainCaveat =
    "# 'real' denotes the real-style rendered domain, this artifact's "
    "reality analog, not robot hardware.";

inline void write_results_tsv(const std::vector<EvalResult>& results,
                              const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_results_tsv: cannot open " + path);
  os << kRealDomainCaveat << "\n";
  os << "checkpoint_id\tmethod\tdomain\tscene\tsplit\tswing\tlighting\t"
        "variant\tn\tk\tp\tstddev\n";
  char buf[320];
  for (const EvalResult& r : results) {
    char sd[32];
    if (r.n >= 2) {
      std::snprintf(sd, sizeof sd, "%.6f", r.stddev());
    } else {
      std::snprintf(sd, sizeof sd, "na");
    }
    std::snprintf(buf, sizeof buf,
                  "%s\t%s\t%s\t%s\t%s\t%s\t%s\t%s\t%d\t%d\t%.6f\t%s\n",
                  r.checkpoint_id.c_str(), r.method.c_str(),
                  to_string(r.domain), r.scene_id.c_str(),
                  to_string(r.split), to_string(r.swing),
                  r.lighting_on ? "on" : "off", to_string(r.variant), r.n,
                  r.k, r.p(), sd);
    os << buf;
  }
}

// Fig. 2-style curve data: one row per checkpoint with both domain
// aggregates, grouped by method and ordered by step.
inline void write_gap_curve(const GapReport& rep, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_gap_curve: cannot open " + path);
  os << kRealDomainCaveat << "\n";
  os << "method\tstep\tsim_success\treal_success\tgap\n";
  char buf[256];
  for (const CheckpointGap& g : rep.per_checkpoint) {
    std::snprintf(buf, sizeof buf, "%s\t%d\t%.6f\t%.6f\t%.6f\n",
                  g.method.c_str(), g.step, g.sim_success, g.real_success,
                  g.gap);
    os << buf;
  }
}

inline void write_gap_report(const GapReport& rep, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("write_gap_report: cannot open " + path);
  os << kRealDomainCaveat << "\n";
  os << "section\tmethod\tdomain\taxis\tgroup\tstep\tn\tk\tp\tsim\treal\t"
        "gap\tstddev\n";
  char buf[320];
  for (const CheckpointGap& g : rep.per_checkpoint) {
    std::snprintf(
        buf, sizeof buf,
        "checkpoint\t%s\t-\t-\t%s\t%d\t-\t-\t-\t%.6f\t%.6f\t%.6f\t-\n",
        g.method.c_str(), g.checkpoint_id.c_str(), g.step, g.sim_success,
        g.real_success, g.gap);
    os << buf;
  }
  for (const MethodGap& m : rep.per_method) {
    std::snprintf(buf, sizeof buf,
                  "method_topk\t%s\t-\t-\t-\t-\t-\t-\t-\t%.6f\t%.6f\t%.6f\t-\n",
                  m.method.c_str(), m.mean_sim, m.mean_real, m.mean_gap);
    os << buf;
  }
  for (const BreakdownRow& b : rep.breakdowns) {
    char sd[32];
    if (b.n >= 2) {
      std::snprintf(sd, sizeof sd, "%.6f", success_stddev(b.p(), b.n));
    } else {
      std::snprintf(sd, sizeof sd, "na");
    }
    std::snprintf(buf, sizeof buf,
                  "breakdown\t%s\t%s\t%s\t%s\t-\t%d\t%d\t%.6f\t-\t-\t-\t%s\n",
                  b.method.c_str(), to_string(b.domain), b.axis.c_str(),
                  b.group.c_str(), b.n, b.k, b.p(), sd);
    os << buf;
  }
}

}  // namespace doorlab

#endif  // DOORLAB_EVALHARNESS_HPP_
