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

#ifndef DOORLAB_LOSSES_HPP_
#define DOORLAB_LOSSES_HPP_

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "doorlab/nn.hpp"
#include "doorlab/policy.hpp"

namespace doorlab {
namespace losses {

// Reduction convention, frozen across the library: Huber terms reduce by
// MEAN over the elements of one comparison (features and batch together),
// and comparisons combine by SUM across heads and across variants. The
// first fused output (variant pair 1,1) is the anchor of every consistency
// term.
//
// Cloning supervises one prediction per variant: in paired rgbd mode that
// is the N diagonal pairs (i,i); the remaining off-diagonal pairs are
// regularized only through the consistency terms.

inline constexpr double kHuberDelta = 1.0;

// Per-step loss decomposition. `total` is defined as bcl() + tcl() with the
// component sums written exactly as below, so re-deriving it from a report
// reproduces the stored value bit for bit.
struct LossReport {
  double tcl_embed = 0.0;
  double tcl_action = 0.0;
  double bcl_arm = 0.0;
  double bcl_base = 0.0;
  double bcl_term = 0.0;
  double total = 0.0;

  double bcl() const { return bcl_arm + bcl_base + bcl_term; }
  double tcl() const { return tcl_embed + tcl_action; }

  void finalize() { total = bcl() + tcl(); }

  bool operator==(const LossReport&) const = default;
};

// Diagonal prediction indices for supervised cloning: row-major pair (i, i)
// in an n x n fused grid.
inline std::vector<std::size_t> diagonal_indices(std::size_t outputs,
                                                 std::size_t n) {
  if (n == 0 || outputs != n * n) {
    throw ContractViolation("diagonal_indices: outputs is not n^2");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i * n + i;
  return idx;
}

inline std::vector<std::size_t> all_indices(std::size_t outputs) {
  std::vector<std::size_t> idx(outputs);
  for (std::size_t i = 0; i < outputs; ++i) idx[i] = i;
  return idx;
}

// ---------------------------------------------------------------------------
// Tape route.

template <typename S>
struct LossGraph {
  nn::Var tcl_embed;
  nn::Var tcl_action;
  nn::Var bcl_arm;
  nn::Var bcl_base;
  nn::Var bcl_term;
  nn::Var total;
};

template <typename S>
nn::Var sum_or_zero(nn::Tape<S>& t, const std::vector<nn::Var>& terms) {
  if (terms.empty()) return t.input(nn::Mat<S>::Zero(1, 1));
  return t.add_n(terms);
}

// Embedding consistency: within each modality's variant list, every
// non-anchor embedding against the anchor. Both modalities contribute in
// rgbd mode.
template <typename S>
nn::Var tcl_embed_terms(nn::Tape<S>& t,
                        const std::vector<std::vector<nn::Var>>& embed_lists,
                        S delta = S(kHuberDelta)) {
  std::vector<nn::Var> terms;
  for (const std::vector<nn::Var>& list : embed_lists) {
    if (list.empty()) {
      throw ContractViolation("tcl_embed_terms: empty variant list");
    }
    for (std::size_t i = 1; i < list.size(); ++i) {
      terms.push_back(t.huber_between(list[0], list[i], delta));
    }
  }
  return sum_or_zero(t, terms);
}

// Action consistency: every non-anchor prediction against the anchor
// prediction (entry 0; pair (1,1) in fused mode), per head.
template <typename S>
nn::Var tcl_action_terms(
    nn::Tape<S>& t,
    const std::vector<typename PolicyNet<S>::HeadOutputs>& outs,
    S delta = S(kHuberDelta)) {
  if (outs.empty()) throw ContractViolation("tcl_action_terms: no predictions");
  std::vector<nn::Var> terms;
  for (std::size_t i = 1; i < outs.size(); ++i) {
    terms.push_back(t.huber_between(outs[0].arm, outs[i].arm, delta));
    terms.push_back(t.huber_between(outs[0].base, outs[i].base, delta));
    terms.push_back(t.huber_between(outs[0].term, outs[i].term, delta));
  }
  return sum_or_zero(t, terms);
}

// Cloning terms for the selected predictions, one Var per head.
template <typename S>
std::array<nn::Var, 3> bcl_terms(
    nn::Tape<S>& t,
    const std::vector<typename PolicyNet<S>::HeadOutputs>& outs,
    const std::vector<std::size_t>& supervised, nn::Var arm_labels,
    nn::Var base_labels, nn::Var term_labels, S delta = S(kHuberDelta)) {
  if (supervised.empty()) {
    throw ContractViolation("bcl_terms: no supervised predictions");
  }
  std::vector<nn::Var> arm_t, base_t, term_t;
  for (std::size_t k : supervised) {
    if (k >= outs.size()) {
      throw ContractViolation("bcl_terms: prediction index out of range");
    }
    arm_t.push_back(t.huber_between(outs[k].arm, arm_labels, delta));
    base_t.push_back(t.huber_between(outs[k].base, base_labels, delta));
    term_t.push_back(t.huber_between(outs[k].term, term_labels, delta));
  }
  return {t.add_n(arm_t), t.add_n(base_t), t.add_n(term_t)};
}

// Full objective over one forward pass. With `with_tcl` false the
// consistency terms are pinned to zero (they still appear in the report, as
// zeros).
template <typename S>
LossGraph<S> build_losses(nn::Tape<S>& t,
                          const typename PolicyNet<S>::ForwardResult& fwd,
                          const std::vector<std::size_t>& supervised,
                          nn::Var arm_labels, nn::Var base_labels,
                          nn::Var term_labels, bool with_tcl,
                          S delta = S(kHuberDelta)) {
  LossGraph<S> g;
  auto bc = bcl_terms(t, fwd.outputs, supervised, arm_labels, base_labels,
                      term_labels, delta);
  g.bcl_arm = bc[0];
  g.bcl_base = bc[1];
  g.bcl_term = bc[2];
  if (with_tcl) {
    std::vector<std::vector<nn::Var>> embed_lists;
    if (!fwd.rgb_embs.empty()) embed_lists.push_back(fwd.rgb_embs);
    if (!fwd.depth_embs.empty()) embed_lists.push_back(fwd.depth_embs);
    if (!fwd.embs.empty()) embed_lists.push_back(fwd.embs);
    g.tcl_embed = tcl_embed_terms(t, embed_lists, delta);
    g.tcl_action = tcl_action_terms(t, fwd.outputs, delta);
  } else {
    g.tcl_embed = t.input(nn::Mat<S>::Zero(1, 1));
    g.tcl_action = t.input(nn::Mat<S>::Zero(1, 1));
  }
  g.total = t.add_n(
      {g.bcl_arm, g.bcl_base, g.bcl_term, g.tcl_embed, g.tcl_action});
  return g;
}

template <typename S>
LossReport report_from(const nn::Tape<S>& t, const LossGraph<S>& g) {
  LossReport r;
  r.tcl_embed = static_cast<double>(t.val(g.tcl_embed)(0, 0));
  r.tcl_action = static_cast<double>(t.val(g.tcl_action)(0, 0));
  r.bcl_arm = static_cast<double>(t.val(g.bcl_arm)(0, 0));
  r.bcl_base = static_cast<double>(t.val(g.bcl_base)(0, 0));
  r.bcl_term = static_cast<double>(t.val(g.bcl_term)(0, 0));
  r.finalize();
  return r;
}

// ---------------------------------------------------------------------------
// Plain route: independent scalar-loop recomputation used to cross-check the
// tape reductions. Shares no code with the tape ops.

inline double huber_scalar(double z, double delta = kHuberDelta) {
  double az = z < 0 ? -z : z;
  if (az <= delta) return 0.5 * z * z;
  return delta * (az - 0.5 * delta);
}

inline double huber_mean_plain(const std::vector<double>& a,
                               const std::vector<double>& b,
                               double delta = kHuberDelta) {
  if (a.size() != b.size() || a.empty()) {
    throw ContractViolation("huber_mean_plain: size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += huber_scalar(a[i] - b[i], delta);
  }
  return total / static_cast<double>(a.size());
}

struct PlainHeads {
  std::vector<double> arm;
  std::vector<double> base;
  std::vector<double> term;
};

struct PlainLabels {
  std::vector<double> arm;
  std::vector<double> base;
  std::vector<double> term;
};

inline LossReport losses_plain(
    const std::vector<std::vector<std::vector<double>>>& embed_lists,
    const std::vector<PlainHeads>& outs,
    const std::vector<std::size_t>& supervised, const PlainLabels& l,
    bool with_tcl, double delta = kHuberDelta) {
  LossReport r;
  for (std::size_t k : supervised) {
    r.bcl_arm += huber_mean_plain(outs.at(k).arm, l.arm, delta);
    r.bcl_base += huber_mean_plain(outs.at(k).base, l.base, delta);
    r.bcl_term += huber_mean_plain(outs.at(k).term, l.term, delta);
  }
  if (with_tcl) {
    for (const auto& list : embed_lists) {
      for (std::size_t i = 1; i < list.size(); ++i) {
        r.tcl_embed += huber_mean_plain(list[0], list[i], delta);
      }
    }
    for (std::size_t i = 1; i < outs.size(); ++i) {
      r.tcl_action += huber_mean_plain(outs[0].arm, outs[i].arm, delta) +
                      huber_mean_plain(outs[0].base, outs[i].base, delta) +
                      huber_mean_plain(outs[0].term, outs[i].term, delta);
    }
  }
  r.finalize();
  return r;
}

template <typename S>
std::vector<double> flatten(const nn::Mat<S>& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<double>(m(i));
  }
  return out;
}

}  // namespace losses
}  // namespace doorlab

#endif  // DOORLAB_LOSSES_HPP_
