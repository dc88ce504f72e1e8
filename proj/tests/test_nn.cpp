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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "doorlab/nn.hpp"
#include "doorlab/rng.hpp"
#include "helpers.hpp"

namespace doorlab {
namespace {

namespace fs = std::filesystem;
using doorlab_test::temp_dir;
using nn::Mat;
using nn::Param;
using nn::ParamStore;
using nn::Tape;
using nn::Var;

using Graph = std::function<Var(Tape<double>&, ParamStore<double>&)>;

// Central-difference check of every parameter entry against the tape.
double max_fd_rel_err(ParamStore<double>& store, const Graph& graph,
                      double h = 1e-5) {
  std::vector<Mat<double>> grads;
  {
    store.zero_grads();
    Tape<double> t;
    Var loss = graph(t, store);
    t.backward(loss);
    // A kink closer than the probe step would invalidate the comparison.
    REQUIRE(t.min_kink_distance() > 10.0 * h);
    for (auto& p : store) grads.push_back(p.grad);
  }
  auto eval = [&]() {
    Tape<double> t;
    return t.scalar(graph(t, store));
  };
  double worst = 0.0;
  std::size_t pi = 0;
  for (auto& p : store) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double keep = p.value(i);
      p.value(i) = keep + h;
      double up = eval();
      p.value(i) = keep - h;
      double down = eval();
      p.value(i) = keep;
      double fd = (up - down) / (2.0 * h);
      double an = grads[pi](i);
      double err = std::abs(an - fd) / std::max(1.0, std::abs(an));
      worst = std::max(worst, err);
    }
    ++pi;
  }
  return worst;
}

Mat<double> random_mat(int rows, int cols, std::uint64_t seed,
                       double scale = 1.0) {
  Rng rng(seed);
  Mat<double> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal(0.0, scale);
  }
  return m;
}

bool mat_eq(const Mat<double>& a, const Mat<double>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

TEST_CASE("tape arithmetic matches direct evaluation", "[nn]") {
  Tape<double> t;
  Mat<double> a = random_mat(3, 4, 1), b = random_mat(3, 4, 2);
  Mat<double> w = random_mat(2, 3, 3);
  Var va = t.input(a), vb = t.input(b), vw = t.input(w);

  CHECK(mat_eq(t.val(t.add(va, vb)), a + b));
  CHECK(mat_eq(t.val(t.sub(va, vb)), a - b));
  CHECK(mat_eq(t.val(t.scale(va, -2.5)), a * -2.5));
  CHECK(mat_eq(t.val(t.matmul(vw, va)), w * a));

  Mat<double> bias = random_mat(3, 1, 4);
  Mat<double> expect = a;
  expect.colwise() += Eigen::VectorXd(bias.col(0));
  CHECK(mat_eq(t.val(t.add_bias(va, t.input(bias))), expect));

  CHECK_THROWS_AS(t.matmul(va, vb), ContractViolation);
  CHECK_THROWS_AS(t.add(va, vw), ContractViolation);
  CHECK_THROWS_AS(t.add_bias(va, vw), ContractViolation);
  CHECK_THROWS_AS(t.concat_rows({}), ContractViolation);
  CHECK_THROWS_AS(t.add_n({}), ContractViolation);
}

TEST_CASE("loss node values are exact on hand cases", "[nn]") {
  Tape<double> t;
  Mat<double> a(2, 1), b(2, 1);
  a << 1.0, 2.0;
  b << 0.5, 0.0;
  // Elementwise Huber at delta 1: 0.125 for |z|=0.5, 1.5 for |z|=2.
  CHECK(t.scalar(t.huber_between(t.input(a), t.input(b), 1.0)) == 0.8125);
  CHECK(t.scalar(t.l1_between(t.input(a), t.input(b))) == 1.25);

  Mat<double> c(2, 1);
  c << 1.0, 3.0;
  CHECK(t.scalar(t.mse_to_const(t.input(c), 2.0)) == 1.0);

  // min_kink_distance tracks the nearest |z| - delta approach.
  Tape<double> t2;
  t2.huber_between(t2.input(a), t2.input(b), 1.0);
  CHECK(t2.min_kink_distance() == 0.5);

  Tape<double> t3;
  Mat<double> r(2, 1);
  r << 0.3, -0.2;
  t3.relu(t3.input(r));
  CHECK(t3.min_kink_distance() == 0.2);
}

TEST_CASE("backward demands a scalar loss", "[nn]") {
  Tape<double> t;
  Var v = t.input(random_mat(2, 2, 5));
  CHECK_THROWS_AS(t.backward(v), ContractViolation);
}

TEST_CASE("gradients of a dense composite graph match finite differences",
          "[nn]") {
  ParamStore<double> store;
  Rng rng(2024);
  nn::he_init(store.add("w1", 4, 6), rng);
  nn::he_init(store.add("b1", 4, 1), rng);
  nn::he_init(store.add("w2", 3, 4), rng);
  nn::he_init(store.add("b2", 3, 1), rng);

  Mat<double> x = random_mat(6, 5, 77);
  Mat<double> target = random_mat(3, 5, 78, 0.3);
  Mat<double> other = random_mat(3, 5, 79, 0.3);

  Graph graph = [&](Tape<double>& t, ParamStore<double>& s) {
    Var h = t.relu(t.add_bias(t.matmul(t.param(s.get("w1")), t.input(x)),
                              t.param(s.get("b1"))));
    Var z = t.tanh_op(t.add_bias(t.matmul(t.param(s.get("w2")), h),
                                 t.param(s.get("b2"))));
    Var e = t.l2_normalize_cols(z, 1e-6);
    Var l1 = t.huber_to_target(e, target, 1.0);
    Var l2 = t.scale(t.l1_between(e, t.input(other)), 0.5);
    Var l3 = t.mse_to_const(t.sigmoid(h), 0.3);
    return t.add_n({l1, l2, l3});
  };
  CHECK(max_fd_rel_err(store, graph) < 1e-6);
}

TEST_CASE("conv2d forward matches a naive reference convolution", "[nn]") {
  nn::ConvSpec spec;
  spec.in_c = 2;
  spec.in_h = spec.in_w = 4;
  spec.out_c = 3;
  spec.kh = spec.kw = 3;
  spec.stride = 1;
  spec.pad = 1;

  Mat<double> x = random_mat(spec.in_c * spec.in_h * spec.in_w, 2, 10);
  Mat<double> w = random_mat(spec.out_c, spec.in_c * spec.kh * spec.kw, 11);
  Mat<double> b = random_mat(spec.out_c, 1, 12);

  Tape<double> t;
  Var out = t.conv2d(t.input(x), t.input(w), t.input(b), spec);
  const Mat<double>& got = t.val(out);
  REQUIRE(got.rows() == spec.out_c * spec.out_h() * spec.out_w());
  REQUIRE(got.cols() == 2);

  for (int n = 0; n < 2; ++n) {
    for (int oc = 0; oc < spec.out_c; ++oc) {
      for (int oy = 0; oy < spec.out_h(); ++oy) {
        for (int ox = 0; ox < spec.out_w(); ++ox) {
          double acc = b(oc, 0);
          for (int ic = 0; ic < spec.in_c; ++ic) {
            for (int di = 0; di < spec.kh; ++di) {
              for (int dj = 0; dj < spec.kw; ++dj) {
                int iy = oy * spec.stride + di - spec.pad;
                int ix = ox * spec.stride + dj - spec.pad;
                if (iy < 0 || iy >= spec.in_h || ix < 0 || ix >= spec.in_w) {
                  continue;
                }
                acc += w(oc, (ic * spec.kh + di) * spec.kw + dj) *
                       x((ic * spec.in_h + iy) * spec.in_w + ix, n);
              }
            }
          }
          double v = got(
              (static_cast<Eigen::Index>(oc) * spec.out_h() + oy) *
                      spec.out_w() + ox, n);
          CHECK(v == Catch::Approx(acc).margin(1e-12));
        }
      }
    }
  }

  Tape<double> t2;
  CHECK_THROWS_AS(t2.conv2d(t2.input(random_mat(7, 1, 1)), t2.input(w),
                            t2.input(b), spec),
                  ContractViolation);
}

TEST_CASE("gradients of a conv encoder stack match finite differences",
          "[nn]") {
  nn::ConvSpec spec;
  spec.in_c = 2;
  spec.in_h = spec.in_w = 4;
  spec.out_c = 3;

  ParamStore<double> store;
  Rng rng(9);
  nn::he_init(store.add("w", spec.out_c, spec.in_c * spec.kh * spec.kw), rng);
  nn::he_init(store.add("b", spec.out_c, 1), rng);
  Mat<double> x = random_mat(spec.in_c * 16, 3, 13);

  Graph graph = [&](Tape<double>& t, ParamStore<double>& s) {
    Var y = t.conv2d(t.input(x), t.param(s.get("w")), t.param(s.get("b")),
                     spec);
    Var p = t.avg_pool2x2(t.tanh_op(y), spec.out_c, 4, 4);
    Var g = t.global_avg_pool(p, spec.out_c, 4);
    return t.mse_to_const(g, 0.2);
  };
  CHECK(max_fd_rel_err(store, graph) < 1e-6);
}

TEST_CASE("pooling and upsampling invert each other", "[nn]") {
  Mat<double> x = random_mat(2 * 3 * 3, 4, 21);
  Tape<double> t;
  Var up = t.upsample2x(t.input(x), 2, 3, 3);
  Var back = t.avg_pool2x2(up, 2, 6, 6);
  CHECK(mat_eq(t.val(back), x));

  // Nearest-neighbour upsample replicates each source pixel four times.
  const Mat<double>& u = t.val(up);
  CHECK(u(0, 0) == x(0, 0));
  CHECK(u(1, 0) == x(0, 0));
  CHECK(u(6, 0) == x(0, 0));
  CHECK(u(7, 0) == x(0, 0));

  Tape<double> t2;
  CHECK_THROWS_AS(t2.avg_pool2x2(t2.input(random_mat(2 * 3 * 3, 1, 1)), 2, 3,
                                 3),
                  ContractViolation);
}

TEST_CASE("l2 normalization produces unit columns and floors at eps", "[nn]") {
  Mat<double> x = random_mat(5, 3, 30);
  x.col(2).setZero();
  Tape<double> t;
  Var e = t.l2_normalize_cols(t.input(x), 1e-6);
  CHECK(t.val(e).col(0).norm() == Catch::Approx(1.0).margin(1e-12));
  CHECK(t.val(e).col(1).norm() == Catch::Approx(1.0).margin(1e-12));
  CHECK(t.val(e).col(2).norm() == 0.0);  // zero column stays zero, no NaN
}

TEST_CASE("stop_gradient blocks the backward pass", "[nn]") {
  ParamStore<double> store;
  Rng rng(40);
  nn::he_init(store.add("w", 3, 3), rng);
  Mat<double> x = random_mat(3, 2, 41);

  Tape<double> t;
  Var y = t.matmul(t.param(store.get("w")), t.input(x));
  Var loss = t.mse_to_const(t.stop_gradient(y), 0.0);
  t.backward(loss);
  CHECK(store.get("w").grad.norm() == 0.0);
}

TEST_CASE("param store enforces unique names", "[nn]") {
  ParamStore<double> store;
  store.add("w", 2, 2);
  CHECK_THROWS_AS(store.add("w", 1, 1), ContractViolation);
  CHECK_THROWS_AS(store.get("missing"), ContractViolation);
  store.add("b", 3, 1);
  CHECK(store.parameter_count() == 7);
}

TEST_CASE("adam takes a signed unit first step and converges", "[nn]") {
  ParamStore<double> store;
  Param<double>& w = store.add("w", 1, 1);
  w.value(0, 0) = 10.0;

  nn::AdamConfig<double> cfg;
  cfg.lr = 0.05;
  nn::Adam<double> opt(cfg);

  auto do_step = [&]() {
    store.zero_grads();
    Tape<double> t;
    Var loss = t.mse_to_const(t.param(w), 3.0);  // (w-3)^2
    t.backward(loss);
    opt.step(store);
  };

  double before = w.value(0, 0);
  double g = 2.0 * (before - 3.0);
  do_step();
  // Bias correction makes the first update lr * g / (|g| + eps).
  double expect = before - cfg.lr * g / (std::abs(g) + cfg.eps);
  CHECK(w.value(0, 0) == Catch::Approx(expect).margin(1e-12));

  for (int i = 0; i < 2000; ++i) do_step();
  CHECK(w.value(0, 0) == Catch::Approx(3.0).margin(1e-3));
  CHECK(opt.steps_taken() == 2001);
}

TEST_CASE("optimizers clip the global gradient norm", "[nn]") {
  ParamStore<double> store;
  Param<double>& w = store.add("w", 1, 1);
  w.value(0, 0) = 0.0;
  w.grad(0, 0) = 1000.0;

  nn::Sgd<double> sgd(0.1, 10.0);
  sgd.step(store);
  // Clipped gradient norm is 10, so the step is exactly lr * 10.
  CHECK(w.value(0, 0) == Catch::Approx(-1.0).margin(1e-12));

  w.grad(0, 0) = 1000.0;
  nn::AdamConfig<double> cfg;
  cfg.clip_norm = 10.0;
  nn::Adam<double> adam(cfg);
  adam.step(store);
  CHECK(w.grad(0, 0) == Catch::Approx(10.0).margin(1e-12));
}

TEST_CASE("parameter files round-trip through f32", "[nn]") {
  fs::path dir = temp_dir("nn_params");
  std::string path = (dir / "net.params").string();

  ParamStore<double> store;
  Rng rng(50);
  nn::he_init(store.add("enc/w", 4, 3), rng);
  nn::he_init(store.add("enc/b", 4, 1), rng);
  store.get("enc/w").m.setConstant(0.25);
  store.get("enc/w").v.setConstant(0.5);
  nn::save_params(store, path);

  ParamStore<double> other;
  other.add("enc/w", 4, 3);
  other.add("enc/b", 4, 1);
  nn::load_params(other, path);
  for (Eigen::Index i = 0; i < 12; ++i) {
    CHECK(other.get("enc/w").value(i) ==
          static_cast<double>(
              static_cast<float>(store.get("enc/w").value(i))));
  }
  CHECK(other.get("enc/w").m(0, 0) == 0.25);
  CHECK(other.get("enc/w").v(0, 0) == 0.5);

  SECTION("param count mismatch") {
    ParamStore<double> bigger;
    bigger.add("enc/w", 4, 3);
    bigger.add("enc/b", 4, 1);
    bigger.add("extra", 1, 1);
    CHECK_THROWS_AS(nn::load_params(bigger, path), FormatError);
  }
  SECTION("shape mismatch") {
    ParamStore<double> wrong;
    wrong.add("enc/w", 3, 4);
    wrong.add("enc/b", 4, 1);
    CHECK_THROWS_AS(nn::load_params(wrong, path), FormatError);
  }
  SECTION("name mismatch") {
    ParamStore<double> renamed;
    renamed.add("enc/weights", 4, 3);
    renamed.add("enc/b", 4, 1);
    CHECK_THROWS_AS(nn::load_params(renamed, path), FormatError);
  }
  SECTION("truncation") {
    std::string bytes = doorlab_test::slurp(path);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    os.close();
    ParamStore<double> again;
    again.add("enc/w", 4, 3);
    again.add("enc/b", 4, 1);
    CHECK_THROWS_AS(nn::load_params(again, path), IncompleteDataError);
  }
  SECTION("bad magic") {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write("XXXXYYYY", 8);
    os.close();
    ParamStore<double> again;
    again.add("enc/w", 4, 3);
    again.add("enc/b", 4, 1);
    CHECK_THROWS_AS(nn::load_params(again, path), FormatError);
  }
}

}  // namespace
}  // namespace doorlab
