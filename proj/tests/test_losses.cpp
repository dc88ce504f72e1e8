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

#include <cstddef>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "doorlab/losses.hpp"
#include "doorlab/nn.hpp"
#include "doorlab/policy.hpp"
#include "helpers.hpp"

namespace {

using doorlab::ContractViolation;
using doorlab::nn::Tape;
using doorlab::nn::Var;
namespace losses = doorlab::losses;

using Mat = doorlab::nn::Mat<double>;
using Net = doorlab::PolicyNet<double>;
using Heads = Net::HeadOutputs;
using Fwd = Net::ForwardResult;

Var col(Tape<double>& t, const std::vector<double>& v) {
  Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = v[i];
  }
  return t.input(m);
}

// Manual prediction with a dummy embed slot; the loss functions only read
// the three head tensors.
Heads heads(Tape<double>& t, const std::vector<double>& arm,
            const std::vector<double>& base, const std::vector<double>& term) {
  return Heads{col(t, {0.0}), col(t, arm), col(t, base), col(t, term)};
}

losses::PlainHeads plain_heads(const std::vector<double>& arm,
                               const std::vector<double>& base,
                               const std::vector<double>& term) {
  return losses::PlainHeads{arm, base, term};
}

double scalar(const Tape<double>& t, Var v) { return t.val(v)(0, 0); }

}  // namespace

TEST_CASE("huber closed forms, both routes", "[losses]") {
  // Quadratic branch: 0.5 * d^2. Linear branch: delta * (|d| - delta / 2).
  CHECK(losses::huber_scalar(0.0) == 0.0);
  CHECK(losses::huber_scalar(0.5) == 0.125);
  CHECK(losses::huber_scalar(-0.5) == 0.125);
  CHECK(losses::huber_scalar(2.0) == 1.5);
  CHECK(losses::huber_scalar(-2.0) == 1.5);
  CHECK(losses::huber_scalar(1.5, 2.0) == 1.125);
  CHECK(losses::huber_scalar(5.0, 2.0) == 8.0);

  Tape<double> t;
  CHECK(scalar(t, t.huber_between(col(t, {0.5}), col(t, {0.0}), 1.0)) ==
        0.125);
  CHECK(scalar(t, t.huber_between(col(t, {2.0}), col(t, {0.0}), 1.0)) == 1.5);
  Var same = col(t, {0.3, -1.2, 7.0});
  CHECK(scalar(t, t.huber_between(same, same, 1.0)) == 0.0);
  // Mean over elements: (0.125 + 1.5) / 2.
  CHECK(scalar(t, t.huber_between(col(t, {0.5, 2.0}), col(t, {0.0, 0.0}),
                                  1.0)) == 0.8125);
}

TEST_CASE("huber symmetry and shape checks", "[losses]") {
  std::vector<double> a = {0.3, -1.7, 2.4};
  std::vector<double> b = {0.0, 0.25, -0.5};
  CHECK(losses::huber_mean_plain(a, b) == losses::huber_mean_plain(b, a));
  CHECK(losses::huber_mean_plain(a, a) == 0.0);

  CHECK_THROWS_AS(losses::huber_mean_plain({1.0}, {1.0, 2.0}),
                  ContractViolation);
  CHECK_THROWS_AS(losses::huber_mean_plain({}, {}), ContractViolation);

  Tape<double> t;
  Var x = col(t, {1.0, 2.0});
  Var y = col(t, {1.0});
  CHECK_THROWS_AS(t.huber_between(x, y, 1.0), ContractViolation);
}

TEST_CASE("tcl vanishes for one variant and for identical variants",
          "[losses]") {
  SECTION("plain, N = 1") {
    losses::PlainHeads h = plain_heads({0.5, 0.5}, {1.0, 0.0}, {0.75});
    losses::PlainLabels l{{0.0, 0.0}, {0.0, 0.0}, {0.0}};
    losses::LossReport r = losses::losses_plain({{{1.0, 0.0}}}, {h}, {0}, l,
                                                /*with_tcl=*/true);
    CHECK(r.tcl_embed == 0.0);
    CHECK(r.tcl_action == 0.0);
    CHECK(r.bcl() > 0.0);
    CHECK(r.total == r.bcl());
  }

  SECTION("plain, identical variants") {
    std::vector<double> e = {0.25, -0.5};
    losses::PlainHeads h = plain_heads({0.5}, {0.25, 0.25}, {0.5});
    losses::PlainLabels l{{0.0}, {0.0, 0.0}, {0.0}};
    losses::LossReport one =
        losses::losses_plain({{e}, {e}}, {h}, {0}, l, true);
    losses::LossReport three = losses::losses_plain(
        {{e, e, e}, {e, e, e}}, {h, h, h}, {0, 1, 2}, l, true);
    CHECK(three.tcl_embed == 0.0);
    CHECK(three.tcl_action == 0.0);
    CHECK(three.bcl_arm == 3.0 * one.bcl_arm);
    CHECK(three.bcl_base == 3.0 * one.bcl_base);
    CHECK(three.bcl_term == 3.0 * one.bcl_term);
  }

  SECTION("tape, N = 1 with predictions equal to labels") {
    Tape<double> t;
    Fwd fwd;
    fwd.embs = {col(t, {1.0, 0.0})};
    fwd.outputs = {heads(t, {0.5, 0.5}, {1.0, 0.0}, {0.75})};
    losses::LossGraph<double> g = losses::build_losses(
        t, fwd, {std::size_t{0}}, col(t, {0.5, 0.5}), col(t, {1.0, 0.0}),
        col(t, {0.75}), /*with_tcl=*/true);
    losses::LossReport r = losses::report_from(t, g);
    CHECK(r == losses::LossReport{});
    CHECK(r.total == 0.0);
  }
}

TEST_CASE("two-variant embedding consistency value", "[losses]") {
  // E1 = (1, 0), E2 = (0, 1): elementwise diffs (1, -1), each inside the
  // quadratic branch, mean(0.5, 0.5) = 0.5. Actions identical.
  std::vector<double> e1 = {1.0, 0.0};
  std::vector<double> e2 = {0.0, 1.0};
  std::vector<double> arm = {0.25, -0.25};
  std::vector<double> base = {0.5, 0.0};
  std::vector<double> term = {0.5};

  SECTION("plain") {
    losses::PlainHeads h = plain_heads(arm, base, term);
    losses::PlainLabels l{arm, base, term};
    losses::LossReport r =
        losses::losses_plain({{e1, e2}}, {h, h}, {0, 1}, l, true);
    CHECK(r.tcl_embed == 0.5);
    CHECK(r.tcl_action == 0.0);
    CHECK(r.bcl_arm == 0.0);
    CHECK(r.bcl_base == 0.0);
    CHECK(r.bcl_term == 0.0);
    CHECK(r.total == 0.5);
  }

  SECTION("tape") {
    Tape<double> t;
    Fwd fwd;
    fwd.embs = {col(t, e1), col(t, e2)};
    fwd.outputs = {heads(t, arm, base, term), heads(t, arm, base, term)};
    losses::LossGraph<double> g =
        losses::build_losses(t, fwd, {std::size_t{0}, std::size_t{1}},
                             col(t, arm), col(t, base), col(t, term), true);
    losses::LossReport r = losses::report_from(t, g);
    CHECK(r.tcl_embed == 0.5);
    CHECK(r.tcl_action == 0.0);
    CHECK(r.total == 0.5);
  }
}

TEST_CASE("bcl sums constant per-head huber across variants", "[losses]") {
  // Arm offset 0.5 over 4 elements -> 0.125 per variant; base offset 2 ->
  // 1.5; term offset 0.25 -> 0.03125. All dyadic, so sums are exact.
  std::vector<double> arm_l(4, 0.0), base_l(2, 0.0), term_l(1, 0.0);
  std::vector<double> arm_p(4, 0.5), base_p(2, 2.0), term_p(1, 0.25);
  losses::PlainHeads h = plain_heads(arm_p, base_p, term_p);
  losses::PlainLabels l{arm_l, base_l, term_l};

  losses::LossReport r =
      losses::losses_plain({}, {h, h, h}, {0, 1, 2}, l, /*with_tcl=*/false);
  CHECK(r.bcl_arm == 3.0 * losses::huber_mean_plain(arm_p, arm_l));
  CHECK(r.bcl_arm == 0.375);
  CHECK(r.bcl_base == 4.5);
  CHECK(r.bcl_term == 0.09375);
  CHECK(r.tcl_embed == 0.0);
  CHECK(r.tcl_action == 0.0);
  CHECK(r.total == r.bcl());

  SECTION("doubling the variant count doubles bcl") {
    losses::LossReport twice = losses::losses_plain(
        {}, {h, h, h, h, h, h}, {0, 1, 2, 3, 4, 5}, l, false);
    CHECK(twice.bcl_arm == 2.0 * r.bcl_arm);
    CHECK(twice.bcl_base == 2.0 * r.bcl_base);
    CHECK(twice.bcl_term == 2.0 * r.bcl_term);
  }

  SECTION("predictions equal to labels give zero") {
    losses::PlainHeads hit = plain_heads(arm_l, base_l, term_l);
    losses::LossReport zero =
        losses::losses_plain({}, {hit, hit}, {0, 1}, l, false);
    CHECK(zero.bcl() == 0.0);
    CHECK(zero.total == 0.0);
  }

  SECTION("tape route agrees") {
    Tape<double> t;
    Fwd fwd;
    fwd.embs = {col(t, {1.0}), col(t, {1.0}), col(t, {1.0})};
    fwd.outputs = {heads(t, arm_p, base_p, term_p),
                   heads(t, arm_p, base_p, term_p),
                   heads(t, arm_p, base_p, term_p)};
    losses::LossGraph<double> g = losses::build_losses(
        t, fwd, losses::all_indices(3), col(t, arm_l), col(t, base_l),
        col(t, term_l), false);
    losses::LossReport rep = losses::report_from(t, g);
    CHECK(rep.bcl_arm == 0.375);
    CHECK(rep.bcl_base == 4.5);
    CHECK(rep.bcl_term == 0.09375);
    CHECK(rep.tcl_embed == 0.0);
    CHECK(rep.tcl_action == 0.0);
  }
}

TEST_CASE("swapping non-anchor variants leaves the report unchanged",
          "[losses]") {
  // Dyadic entries keep every partial sum exact, so the reports match bit
  // for bit under reordering.
  std::vector<double> e0 = {0.5, -0.25};
  std::vector<double> e1 = {1.0, 0.75};
  std::vector<double> e2 = {-0.5, 0.25};
  losses::PlainHeads h0 = plain_heads({0.5, 0.25}, {0.5, -0.5}, {0.25});
  losses::PlainHeads h1 = plain_heads({1.5, -0.75}, {0.0, 1.0}, {0.75});
  losses::PlainHeads h2 = plain_heads({-0.5, 0.5}, {2.0, 0.25}, {0.5});
  losses::PlainLabels l{{0.25, 0.25}, {0.5, 0.5}, {0.5}};

  losses::LossReport a = losses::losses_plain(
      {{e0, e1, e2}}, {h0, h1, h2}, {0, 1, 2}, l, true);
  losses::LossReport b = losses::losses_plain(
      {{e0, e2, e1}}, {h0, h2, h1}, {0, 1, 2}, l, true);
  CHECK(a == b);
  CHECK(a.total > 0.0);
}

TEST_CASE("supervised index helpers", "[losses]") {
  CHECK(losses::diagonal_indices(9, 3) ==
        std::vector<std::size_t>{0, 4, 8});
  CHECK(losses::diagonal_indices(4, 2) == std::vector<std::size_t>{0, 3});
  CHECK(losses::diagonal_indices(1, 1) == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(losses::diagonal_indices(8, 3), ContractViolation);
  CHECK_THROWS_AS(losses::diagonal_indices(9, 0), ContractViolation);

  CHECK(losses::all_indices(4) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(losses::all_indices(0).empty());
}

TEST_CASE("loss builders reject malformed inputs", "[losses]") {
  Tape<double> t;
  std::vector<std::vector<Var>> with_empty = {{col(t, {1.0})}, {}};
  CHECK_THROWS_AS(losses::tcl_embed_terms(t, with_empty), ContractViolation);

  std::vector<Heads> none;
  CHECK_THROWS_AS(losses::tcl_action_terms(t, none), ContractViolation);

  std::vector<Heads> one = {heads(t, {0.0}, {0.0}, {0.5})};
  Var l1 = col(t, {0.0});
  Var lt = col(t, {0.5});
  CHECK_THROWS_AS(losses::bcl_terms(t, one, {}, l1, l1, lt),
                  ContractViolation);
  CHECK_THROWS_AS(losses::bcl_terms(t, one, {std::size_t{1}}, l1, l1, lt),
                  ContractViolation);
}

TEST_CASE("report total is the exact sum of its parts", "[losses]") {
  losses::LossReport r;
  r.tcl_embed = 0.3141;
  r.tcl_action = 0.0072;
  r.bcl_arm = 1.25e-3;
  r.bcl_base = 0.875;
  r.bcl_term = 0.0625;
  r.finalize();
  CHECK(r.total == r.bcl() + r.tcl());

  losses::LossReport copy = r;
  copy.finalize();
  CHECK(copy == r);
}

TEST_CASE("tape route matches the plain recomputation on a policy forward",
          "[losses]") {
  using namespace doorlab;
  PolicyConfig cfg = doorlab_test::tiny_policy(PolicyModality::kRgbd, 32);
  Net net(cfg, 7);

  Episode ep = doorlab_test::synthetic_episode(4, 32, 32, 21);
  std::vector<std::vector<const Frame*>> variants(3);
  for (int v = 0; v < 3; ++v) {
    variants[v] = {&ep.frames[v].frame, &ep.frames[v + 1].frame};
  }

  Tape<double> t;
  Fwd fwd = net.forward_variants(t, variants);
  REQUIRE(fwd.outputs.size() == 9);

  const int batch = 2;
  auto fill = [](int rows, int cols, int salt) {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        m(i, j) = ((i * 7 + j * 3 + salt) % 11) / 8.0 - 0.5;
      }
    }
    return m;
  };
  Mat arm_l = fill(cfg.arm_out(), batch, 1);
  Mat base_l = fill(cfg.base_out(), batch, 2);
  Mat term_l = fill(cfg.lookahead, batch, 3).array().abs().matrix();

  std::vector<std::size_t> supervised =
      losses::diagonal_indices(fwd.outputs.size(), 3);
  losses::LossGraph<double> g =
      losses::build_losses(t, fwd, supervised, t.input(arm_l),
                           t.input(base_l), t.input(term_l), true);
  losses::LossReport rep = losses::report_from(t, g);

  // Independent scalar-loop recomputation from the numeric tensor values.
  std::vector<std::vector<std::vector<double>>> embed_lists(2);
  for (Var v : fwd.rgb_embs) embed_lists[0].push_back(losses::flatten(t.val(v)));
  for (Var v : fwd.depth_embs) {
    embed_lists[1].push_back(losses::flatten(t.val(v)));
  }
  std::vector<losses::PlainHeads> outs;
  for (const Heads& h : fwd.outputs) {
    outs.push_back(losses::PlainHeads{losses::flatten(t.val(h.arm)),
                                      losses::flatten(t.val(h.base)),
                                      losses::flatten(t.val(h.term))});
  }
  losses::PlainLabels labels{losses::flatten(arm_l), losses::flatten(base_l),
                             losses::flatten(term_l)};
  losses::LossReport plain =
      losses::losses_plain(embed_lists, outs, supervised, labels, true);

  CHECK(rep.tcl_embed == Catch::Approx(plain.tcl_embed).margin(1e-12));
  CHECK(rep.tcl_action == Catch::Approx(plain.tcl_action).margin(1e-12));
  CHECK(rep.bcl_arm == Catch::Approx(plain.bcl_arm).margin(1e-12));
  CHECK(rep.bcl_base == Catch::Approx(plain.bcl_base).margin(1e-12));
  CHECK(rep.bcl_term == Catch::Approx(plain.bcl_term).margin(1e-12));
  CHECK(rep.total == rep.bcl() + rep.tcl());
  CHECK(scalar(t, g.total) == Catch::Approx(rep.total).margin(1e-12));
  CHECK(rep.tcl() > 0.0);
  CHECK(rep.bcl() > 0.0);

  SECTION("with_tcl=false pins the consistency terms to zero") {
    losses::LossGraph<double> g2 =
        losses::build_losses(t, fwd, supervised, t.input(arm_l),
                             t.input(base_l), t.input(term_l), false);
    losses::LossReport rep2 = losses::report_from(t, g2);
    CHECK(rep2.tcl_embed == 0.0);
    CHECK(rep2.tcl_action == 0.0);
    CHECK(rep2.bcl_arm == rep.bcl_arm);
    CHECK(rep2.bcl_base == rep.bcl_base);
    CHECK(rep2.bcl_term == rep.bcl_term);
    CHECK(rep2.total == rep2.bcl());
  }

  SECTION("gradient reaches both encoders through the total") {
    net.params().zero_grads();
    t.backward(g.total);
    CHECK(net.params().get("rgb.stem.w").grad.norm() > 0.0);
    CHECK(net.params().get("depth.stem.w").grad.norm() > 0.0);
  }
}
