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

#ifndef DOORLAB_NN_HPP_
#define DOORLAB_NN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doorlab/errors.hpp"
#include "doorlab/rng.hpp"

namespace doorlab {
namespace nn {

// Reverse-mode autodiff on a dynamic tape of matrix-valued nodes. Columns
// are batch samples, rows are features. Templating on the scalar lets the
// training stack run in float while the finite-difference checks instantiate
// the identical graph in double.

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  Mat<S> m, v;  // Adam moments

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename S>
class ParamStore {
 public:
  Param<S>& add(const std::string& name, int rows, int cols) {
    for (const auto& p : params_) {
      if (p.name == name) {
        throw ContractViolation("ParamStore: duplicate param " + name);
      }
    }
    params_.emplace_back();
    Param<S>& p = params_.back();
    p.name = name;
    p.value.setZero(rows, cols);
    p.grad.setZero(rows, cols);
    p.m.setZero(rows, cols);
    p.v.setZero(rows, cols);
    return p;
  }

  Param<S>& get(const std::string& name) {
    for (auto& p : params_) {
      if (p.name == name) return p;
    }
    throw ContractViolation("ParamStore: unknown param " + name);
  }

  const Param<S>& get(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return p;
    }
    throw ContractViolation("ParamStore: unknown param " + name);
  }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::deque<Param<S>> params_;  // deque: Param pointers stay valid on add
};

// He-normal initialization, fan-in taken from the column count.
template <typename S>
void he_init(Param<S>& p, Rng& rng) {
  double stddev = std::sqrt(2.0 / static_cast<double>(p.value.cols()));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      p.value(i, j) = static_cast<S>(rng.normal(0.0, stddev));
    }
  }
}

struct ConvSpec {
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, kh = 3, kw = 3;
  int stride = 1, pad = 1;

  int out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
};

struct Var {
  int idx = -1;
};

template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----

  Var input(Mat<S> value) {
    return push(std::move(value), nullptr);
  }

  Var param(Param<S>& p) {
    Var v = push(p.value, nullptr);
    Param<S>* pp = &p;
    int idx = v.idx;
    nodes_[idx].backward = [idx, pp](Tape& t) {
      pp->grad += t.nodes_[idx].grad;
    };
    return v;
  }

  // ---- arithmetic ----

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Var v = push(val(a) + val(b), nullptr);
    int ia = a.idx, ib = b.idx, iv = v.idx;
    nodes_[iv].backward = [ia, ib, iv](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[iv].grad;
      t.nodes_[ib].grad += t.nodes_[iv].grad;
    };
    return v;
  }

  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Var v = push(val(a) - val(b), nullptr);
    int ia = a.idx, ib = b.idx, iv = v.idx;
    nodes_[iv].backward = [ia, ib, iv](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[iv].grad;
      t.nodes_[ib].grad -= t.nodes_[iv].grad;
    };
    return v;
  }

  Var scale(Var a, S s) {
    Var v = push(val(a) * s, nullptr);
    int ia = a.idx, iv = v.idx;
    nodes_[iv].backward = [ia, iv, s](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[iv].grad * s;
    };
    return v;
  }

  Var matmul(Var a, Var b) {
    if (val(a).cols() != val(b).rows()) {
      throw ContractViolation("matmul: inner dimensions disagree");
    }
    Var v = push(val(a) * val(b), nullptr);
    int ia = a.idx, ib = b.idx, iv = v.idx;
    nodes_[iv].backward = [ia, ib, iv](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[iv].grad * t.val_of(ib).transpose();
      t.nodes_[ib].grad += t.val_of(ia).transpose() * t.nodes_[iv].grad;
    };
    return v;
  }

  // Broadcast a column bias over the batch.
  Var add_bias(Var x, Var b) {
    if (val(b).cols() != 1 || val(b).rows() != val(x).rows()) {
      throw ContractViolation("add_bias: bias must be a matching column");
    }
    Mat<S> out = val(x);
    out.colwise() += Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(
        val(b).col(0));
    Var v = push(std::move(out), nullptr);
    int ix = x.idx, ib = b.idx, iv = v.idx;
    nodes_[iv].backward = [ix, ib, iv](Tape& t) {
      t.nodes_[ix].grad += t.nodes_[iv].grad;
      t.nodes_[ib].grad.col(0) += t.nodes_[iv].grad.rowwise().sum();
    };
    return v;
  }

  // ---- nonlinearities ----

  Var relu(Var x) {
    const Mat<S>& in = val(x);
    for (Eigen::Index i = 0; i < in.size(); ++i) {
      min_kink_dist_ = std::min(min_kink_dist_,
                                static_cast<double>(std::abs(in(i))));
    }
    Var v = push(in.cwiseMax(S(0)), nullptr);
    int ix = x.idx, iv = v.idx;
    nodes_[iv].backward = [ix, iv](Tape& t) {
      const Mat<S>& xin = t.val_of(ix);
      Mat<S>& gx = t.nodes_[ix].grad;
      const Mat<S>& gv = t.nodes_[iv].grad;
      for (Eigen::Index i = 0; i < xin.size(); ++i) {
        if (xin(i) > S(0)) gx(i) += gv(i);
      }
    };
    return v;
  }

  Var sigmoid(Var x) {
    Mat<S> out = val(x).unaryExpr(
        [](S v) { return S(1) / (S(1) + std::exp(-v)); });
    Var v = push(std::move(out), nullptr);
    int ix = x.idx, iv = v.idx;
    nodes_[iv].backward = [ix, iv](Tape& t) {
      const Mat<S>& y = t.val_of(iv);
      t.nodes_[ix].grad.array() +=
          t.nodes_[iv].grad.array() * y.array() * (S(1) - y.array());
    };
    return v;
  }

  Var tanh_op(Var x) {
    Mat<S> out = val(x).unaryExpr([](S v) { return std::tanh(v); });
    Var v = push(std::move(out), nullptr);
    int ix = x.idx, iv = v.idx;
    nodes_[iv].backward = [ix, iv](Tape& t) {
      const Mat<S>& y = t.val_of(iv);
      t.nodes_[ix].grad.array() +=
          t.nodes_[iv].grad.array() * (S(1) - y.array().square());
    };
    return v;
  }

  // ---- structure ----

  Var concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw ContractViolation("concat_rows: empty");
    Eigen::Index cols = val(xs[0]).cols(), rows = 0;
    for (Var x : xs) {
      if (val(x).cols() != cols) {
        throw ContractViolation("concat_rows: batch sizes disagree");
      }
      rows += val(x).rows();
    }
    Mat<S> out(rows, cols);
    Eigen::Index r = 0;
    for (Var x : xs) {
      out.middleRows(r, val(x).rows()) = val(x);
      r += val(x).rows();
    }
    Var v = push(std::move(out), nullptr);
    std::vector<int> srcs;
    for (Var x : xs) srcs.push_back(x.idx);
    int iv = v.idx;
    nodes_[iv].backward = [srcs, iv](Tape& t) {
      Eigen::Index r = 0;
      for (int ix : srcs) {
        Eigen::Index n = t.val_of(ix).rows();
        t.nodes_[ix].grad += t.nodes_[iv].grad.middleRows(r, n);
        r += n;
      }
    };
    return v;
  }

  Var stop_gradient(Var x) { return push(val(x), nullptr); }

  // L2-normalize each column; eps floors the norm.
  Var l2_normalize_cols(Var x, S eps) {
    const Mat<S>& in = val(x);
    Mat<S> out = in;
    std::vector<S> norms(in.cols());
    for (Eigen::Index j = 0; j < in.cols(); ++j) {
      S n = std::max(in.col(j).norm(), eps);
      norms[static_cast<std::size_t>(j)] = n;
      out.col(j) /= n;
    }
    Var v = push(std::move(out), nullptr);
    int ix = x.idx, iv = v.idx;
    nodes_[iv].backward = [ix, iv, norms](Tape& t) {
      const Mat<S>& y = t.val_of(iv);
      const Mat<S>& gv = t.nodes_[iv].grad;
      Mat<S>& gx = t.nodes_[ix].grad;
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        S n = norms[static_cast<std::size_t>(j)];
        S dot = y.col(j).dot(gv.col(j));
        gx.col(j) += (gv.col(j) - y.col(j) * dot) / n;
      }
    };
    return v;
  }

  // ---- convolution and pooling ----

  Var conv2d(Var x, Var w, Var b, const ConvSpec& spec) {
    const Mat<S>& xin = val(x);
    int oh = spec.out_h(), ow = spec.out_w();
    int krows = spec.in_c * spec.kh * spec.kw;
    if (xin.rows() != spec.in_c * spec.in_h * spec.in_w) {
      throw ContractViolation("conv2d: input rows disagree with spec");
    }
    if (val(w).rows() != spec.out_c || val(w).cols() != krows) {
      throw ContractViolation("conv2d: weight shape disagrees with spec");
    }
    Eigen::Index batch = xin.cols();
    Mat<S> out(static_cast<Eigen::Index>(spec.out_c) * oh * ow, batch);
    std::vector<Mat<S>> cols(static_cast<std::size_t>(batch));
    for (Eigen::Index n = 0; n < batch; ++n) {
      Mat<S>& col = cols[static_cast<std::size_t>(n)];
      im2col(xin.col(n).data(), spec, col);
      Mat<S> y = val(w) * col;  // out_c x (oh*ow)
      y.colwise() += Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(
          val(b).col(0));
      // Flatten channel-major: row index = c*oh*ow + spatial.
      for (int c = 0; c < spec.out_c; ++c) {
        out.col(n).segment(static_cast<Eigen::Index>(c) * oh * ow, oh * ow) =
            y.row(c).transpose();
      }
    }
    Var v = push(std::move(out), nullptr);
    nodes_[v.idx].aux = std::move(cols);
    int ix = x.idx, iw = w.idx, ib = b.idx, iv = v.idx;
    ConvSpec sp = spec;
    nodes_[iv].backward = [ix, iw, ib, iv, sp](Tape& t) {
      int oh = sp.out_h(), ow = sp.out_w();
      const Mat<S>& gv = t.nodes_[iv].grad;
      const auto& cols = t.nodes_[iv].aux;
      Eigen::Index batch = gv.cols();
      Mat<S> gy(sp.out_c, static_cast<Eigen::Index>(oh) * ow);
      for (Eigen::Index n = 0; n < batch; ++n) {
        for (int c = 0; c < sp.out_c; ++c) {
          gy.row(c) = gv.col(n)
                          .segment(static_cast<Eigen::Index>(c) * oh * ow,
                                   oh * ow)
                          .transpose();
        }
        const Mat<S>& col = cols[static_cast<std::size_t>(n)];
        t.nodes_[iw].grad += gy * col.transpose();
        t.nodes_[ib].grad.col(0) += gy.rowwise().sum();
        Mat<S> gcol = t.val_of(iw).transpose() * gy;
        t.col2im(gcol, sp, t.nodes_[ix].grad.col(n).data());
      }
    };
    return v;
  }

  Var avg_pool2x2(Var x, int c, int h, int w) {
    const Mat<S>& xin = val(x);
    if (h % 2 != 0 || w % 2 != 0) {
      throw ContractViolation("avg_pool2x2: odd spatial size");
    }
    if (xin.rows() != static_cast<Eigen::Index>(c) * h * w) {
      throw ContractViolation("avg_pool2x2: input rows disagree");
    }
    int oh = h / 2, ow = w / 2;
    Eigen::Index batch = xin.cols();
    Mat<S> out(static_cast<Eigen::Index>(c) * oh * ow, batch);
    for (Eigen::Index n = 0; n < batch; ++n) {
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
          for (int xx = 0; xx < ow; ++xx) {
            Eigen::Index base =
                static_cast<Eigen::Index>(ch) * h * w;
            S s = xin(base + (2 * y) * w + 2 * xx, n) +
                  xin(base + (2 * y) * w + 2 * xx + 1, n) +
                  xin(base + (2 * y + 1) * w + 2 * xx, n) +
                  xin(base + (2 * y + 1) * w + 2 * xx + 1, n);
            out(static_cast<Eigen::Index>(ch) * oh * ow + y * ow + xx, n) =
                s * S(0.25);
          }
        }
      }
    }
    Var v = push(std::move(out), nullptr);
    int ix = x.idx, iv = v.idx;
    nodes_[iv].backward = [ix, iv, c, h, w](Tape& t) {
      int oh = h / 2, ow = w / 2;
      const Mat<S>& gv = t.nodes_[iv].grad;
      Mat<S>& gx = t.nodes_[ix].grad;
      for (Eigen::Index n = 0; n < gv.cols(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
          for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
              S g = gv(static_cast<Eigen::Index>(ch) * oh * ow + y * ow + xx,
                       n) *
                    S(0.25);
              Eigen::Index base = static_cast<Eigen::Index>(ch) * h * w;
              gx(base + (2 * y) * w + 2 * xx, n) += g;
              gx(base + (2 * y) * w + 2 * xx + 1, n) += g;
              gx(base + (2 * y + 1) * w + 2 * xx, n) += g;
              gx(base + (2 * y + 1) * w + 2 * xx + 1, n) += g;
            }
          }
        }
      }
    };
    return v;
  }

  Var global_avg_pool(Var x, int c, int hw) {
    const Mat<S>& xin = val(x);
    if (xin.rows() != static_cast<Eigen::Index>(c) * hw) {
      throw ContractViolation("global_avg_pool: input rows disagree");
    }
    Mat<S> out(c, xin.cols());
    for (Eigen::Index n = 0; n < xin.cols(); ++n) {
      for (int ch = 0; ch < c; ++ch) {
        out(ch, n) =
            xin.col(n).segment(static_cast<Eigen::Index>(ch) * hw, hw).mean();
      }
    }
    Var v = push(std::move(out), nullptr);
    int ix = x.idx, iv = v.idx;
    nodes_[iv].backward = [ix, iv, c, hw](Tape& t) {
      const Mat<S>& gv = t.nodes_[iv].grad;
      Mat<S>& gx = t.nodes_[ix].grad;
      S inv = S(1) / static_cast<S>(hw);
      for (Eigen::Index n = 0; n < gv.cols(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
          gx.col(n)
              .segment(static_cast<Eigen::Index>(ch) * hw, hw)
              .array() += gv(ch, n) * inv;
        }
      }
    };
    return v;
  }

  // Nearest-neighbor 2x upsample (decoder side of the translation net).
  Var upsample2x(Var x, int c, int h, int w) {
    const Mat<S>& xin = val(x);
    if (xin.rows() != static_cast<Eigen::Index>(c) * h * w) {
      throw ContractViolation("upsample2x: input rows disagree");
    }
    int oh = h * 2, ow = w * 2;
    Mat<S> out(static_cast<Eigen::Index>(c) * oh * ow, xin.cols());
    for (Eigen::Index n = 0; n < xin.cols(); ++n) {
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < oh; ++y) {
          for (int xx = 0; xx < ow; ++xx) {
            out(static_cast<Eigen::Index>(ch) * oh * ow + y * ow + xx, n) =
                xin(static_cast<Eigen::Index>(ch) * h * w + (y / 2) * w +
                        xx / 2,
                    n);
          }
        }
      }
    }
    Var v = push(std::move(out), nullptr);
    int ix = x.idx, iv = v.idx;
    nodes_[iv].backward = [ix, iv, c, h, w](Tape& t) {
      int oh = h * 2, ow = w * 2;
      const Mat<S>& gv = t.nodes_[iv].grad;
      Mat<S>& gx = t.nodes_[ix].grad;
      for (Eigen::Index n = 0; n < gv.cols(); ++n) {
        for (int ch = 0; ch < c; ++ch) {
          for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
              gx(static_cast<Eigen::Index>(ch) * h * w + (y / 2) * w + xx / 2,
                 n) +=
                  gv(static_cast<Eigen::Index>(ch) * oh * ow + y * ow + xx,
                     n);
            }
          }
        }
      }
    };
    return v;
  }

  // ---- losses (scalars are 1x1 nodes) ----

  // Mean elementwise Huber between two tensors.
  Var huber_between(Var a, Var b, S delta) {
    check_same_shape(a, b, "huber_between");
    const Mat<S>&va = val(a), &vb = val(b);
    S total = S(0);
    for (Eigen::Index i = 0; i < va.size(); ++i) {
      S z = va(i) - vb(i);
      S az = std::abs(z);
      min_kink_dist_ = std::min(min_kink_dist_,
                                static_cast<double>(std::abs(az - delta)));
      total += az <= delta ? S(0.5) * z * z : delta * (az - S(0.5) * delta);
    }
    S n = static_cast<S>(va.size());
    Mat<S> out(1, 1);
    out(0, 0) = total / n;
    Var v = push(std::move(out), nullptr);
    int ia = a.idx, ib = b.idx, iv = v.idx;
    nodes_[iv].backward = [ia, ib, iv, delta, n](Tape& t) {
      const Mat<S>&va = t.val_of(ia), &vb = t.val_of(ib);
      S g = t.nodes_[iv].grad(0, 0) / n;
      Mat<S>& ga = t.nodes_[ia].grad;
      Mat<S>& gb = t.nodes_[ib].grad;
      for (Eigen::Index i = 0; i < va.size(); ++i) {
        S z = va(i) - vb(i);
        S d = std::abs(z) <= delta ? z : (z > S(0) ? delta : -delta);
        ga(i) += g * d;
        gb(i) -= g * d;
      }
    };
    return v;
  }

  Var huber_to_target(Var a, const Mat<S>& target, S delta) {
    Var tgt = input(target);
    return huber_between(a, tgt, delta);
  }

  // Mean squared error against a constant fill value (LSGAN objectives).
  Var mse_to_const(Var a, S target) {
    const Mat<S>& va = val(a);
    S total = S(0);
    for (Eigen::Index i = 0; i < va.size(); ++i) {
      S z = va(i) - target;
      total += z * z;
    }
    S n = static_cast<S>(va.size());
    Mat<S> out(1, 1);
    out(0, 0) = total / n;
    Var v = push(std::move(out), nullptr);
    int ia = a.idx, iv = v.idx;
    nodes_[iv].backward = [ia, iv, target, n](Tape& t) {
      const Mat<S>& va = t.val_of(ia);
      S g = t.nodes_[iv].grad(0, 0) * S(2) / n;
      for (Eigen::Index i = 0; i < va.size(); ++i) {
        t.nodes_[ia].grad(i) += g * (va(i) - target);
      }
    };
    return v;
  }

  // Mean absolute error between tensors (cycle consistency).
  Var l1_between(Var a, Var b) {
    check_same_shape(a, b, "l1_between");
    const Mat<S>&va = val(a), &vb = val(b);
    S total = S(0);
    for (Eigen::Index i = 0; i < va.size(); ++i) {
      S z = va(i) - vb(i);
      min_kink_dist_ = std::min(min_kink_dist_,
                                static_cast<double>(std::abs(z)));
      total += std::abs(z);
    }
    S n = static_cast<S>(va.size());
    Mat<S> out(1, 1);
    out(0, 0) = total / n;
    Var v = push(std::move(out), nullptr);
    int ia = a.idx, ib = b.idx, iv = v.idx;
    nodes_[iv].backward = [ia, ib, iv, n](Tape& t) {
      const Mat<S>&va = t.val_of(ia), &vb = t.val_of(ib);
      S g = t.nodes_[iv].grad(0, 0) / n;
      for (Eigen::Index i = 0; i < va.size(); ++i) {
        S s = va(i) - vb(i) > S(0) ? S(1) : S(-1);
        t.nodes_[ia].grad(i) += g * s;
        t.nodes_[ib].grad(i) -= g * s;
      }
    };
    return v;
  }

  Var add_n(const std::vector<Var>& xs) {
    if (xs.empty()) throw ContractViolation("add_n: empty");
    Var acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
  }

  // ---- execution ----

  void backward(Var loss) {
    if (val(loss).rows() != 1 || val(loss).cols() != 1) {
      throw ContractViolation("backward: loss must be scalar");
    }
    for (auto& n : nodes_) {
      n.grad.setZero(n.value.rows(), n.value.cols());
    }
    nodes_[static_cast<std::size_t>(loss.idx)].grad(0, 0) = S(1);
    for (int i = loss.idx; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward) n.backward(*this);
    }
  }

  const Mat<S>& val(Var v) const { return val_of(v.idx); }
  const Mat<S>& grad(Var v) const {
    return nodes_[static_cast<std::size_t>(v.idx)].grad;
  }
  S scalar(Var v) const { return val(v)(0, 0); }

  // Smallest distance (in forward values) to a ReLU / Huber / L1 kink seen
  // during graph construction. Finite-difference tests reseed when this is
  // within the probe step.
  double min_kink_distance() const { return min_kink_dist_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    std::function<void(Tape&)> backward;
    std::vector<Mat<S>> aux;
  };

  const Mat<S>& val_of(int idx) const {
    return nodes_[static_cast<std::size_t>(idx)].value;
  }

  Var push(Mat<S> value, std::function<void(Tape&)> bw) {
    Node n;
    n.value = std::move(value);
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
      throw ContractViolation(std::string(op) + ": shape mismatch");
    }
  }

  void im2col(const S* x, const ConvSpec& sp, Mat<S>& col) const {
    int oh = sp.out_h(), ow = sp.out_w();
    col.setZero(static_cast<Eigen::Index>(sp.in_c) * sp.kh * sp.kw,
                static_cast<Eigen::Index>(oh) * ow);
    for (int c = 0; c < sp.in_c; ++c) {
      for (int di = 0; di < sp.kh; ++di) {
        for (int dj = 0; dj < sp.kw; ++dj) {
          Eigen::Index row =
              (static_cast<Eigen::Index>(c) * sp.kh + di) * sp.kw + dj;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * sp.stride + di - sp.pad;
            if (iy < 0 || iy >= sp.in_h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              int ixx = ox * sp.stride + dj - sp.pad;
              if (ixx < 0 || ixx >= sp.in_w) continue;
              col(row, static_cast<Eigen::Index>(oy) * ow + ox) =
                  x[static_cast<Eigen::Index>(c) * sp.in_h * sp.in_w +
                    static_cast<Eigen::Index>(iy) * sp.in_w + ixx];
            }
          }
        }
      }
    }
  }

  void col2im(const Mat<S>& gcol, const ConvSpec& sp, S* gx) const {
    int oh = sp.out_h(), ow = sp.out_w();
    for (int c = 0; c < sp.in_c; ++c) {
      for (int di = 0; di < sp.kh; ++di) {
        for (int dj = 0; dj < sp.kw; ++dj) {
          Eigen::Index row =
              (static_cast<Eigen::Index>(c) * sp.kh + di) * sp.kw + dj;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * sp.stride + di - sp.pad;
            if (iy < 0 || iy >= sp.in_h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              int ixx = ox * sp.stride + dj - sp.pad;
              if (ixx < 0 || ixx >= sp.in_w) continue;
              gx[static_cast<Eigen::Index>(c) * sp.in_h * sp.in_w +
                 static_cast<Eigen::Index>(iy) * sp.in_w + ixx] +=
                  gcol(row, static_cast<Eigen::Index>(oy) * ow + ox);
            }
          }
        }
      }
    }
  }

  std::vector<Node> nodes_;
  double min_kink_dist_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Adam.

template <typename S>
struct AdamConfig {
  S lr = S(1e-3);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  S clip_norm = S(10);  // global gradient-norm clip; <= 0 disables
};

template <typename S>
class Adam {
 public:
  explicit Adam(AdamConfig<S> cfg = AdamConfig<S>{}) : cfg_(cfg) {}

  void step(ParamStore<S>& store) {
    if (cfg_.clip_norm > S(0)) {
      double sq = 0.0;
      for (auto& p : store) sq += static_cast<double>(p.grad.squaredNorm());
      double norm = std::sqrt(sq);
      if (norm > static_cast<double>(cfg_.clip_norm)) {
        S s = static_cast<S>(static_cast<double>(cfg_.clip_norm) / norm);
        for (auto& p : store) p.grad *= s;
      }
    }
    ++t_;
    S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(cfg_.beta1),
                                           t_));
    S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(cfg_.beta2),
                                           t_));
    for (auto& p : store) {
      p.m = cfg_.beta1 * p.m + (S(1) - cfg_.beta1) * p.grad;
      p.v = cfg_.beta2 * p.v.array().matrix() +
            (S(1) - cfg_.beta2) * p.grad.array().square().matrix();
      p.value.array() -= cfg_.lr * (p.m.array() / bc1) /
                         ((p.v.array() / bc2).sqrt() + cfg_.eps);
    }
  }

  int steps_taken() const { return t_; }
  void set_steps_taken(int t) { t_ = t; }

 private:
  AdamConfig<S> cfg_;
  int t_ = 0;
};

// Plain SGD with the same global-norm clip, for the optimizer ablation.
template <typename S>
class Sgd {
 public:
  explicit Sgd(S lr, S clip_norm = S(10)) : lr_(lr), clip_norm_(clip_norm) {}

  void step(ParamStore<S>& store) {
    if (clip_norm_ > S(0)) {
      double sq = 0.0;
      for (auto& p : store) sq += static_cast<double>(p.grad.squaredNorm());
      double norm = std::sqrt(sq);
      if (norm > static_cast<double>(clip_norm_)) {
        S s = static_cast<S>(static_cast<double>(clip_norm_) / norm);
        for (auto& p : store) p.grad *= s;
      }
    }
    ++t_;
    for (auto& p : store) p.value -= lr_ * p.grad;
  }

  int steps_taken() const { return t_; }

 private:
  S lr_;
  S clip_norm_;
  int t_ = 0;
};

// ---------------------------------------------------------------------------
// Parameter (de)serialization. f32 payload regardless of the working scalar.

inline constexpr std::uint32_t kParamsMagic = 0x4B434C44;  // "DLCK"

template <typename S>
void save_params(const ParamStore<S>& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("save_params: cannot open " + path);
  auto w32 = [&](std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
  };
  w32(kParamsMagic);
  w32(1);  // version
  w32(static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store) {
    w32(static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    w32(static_cast<std::uint32_t>(p.value.rows()));
    w32(static_cast<std::uint32_t>(p.value.cols()));
    for (const Mat<S>* m : {&p.value, &p.m, &p.v}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) {
        float f = static_cast<float>((*m)(i));
        os.write(reinterpret_cast<const char*>(&f), 4);
      }
    }
  }
  if (!os) throw Error("save_params: write failed for " + path);
}

template <typename S>
void load_params(ParamStore<S>& store, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_params: cannot open " + path);
  std::uint64_t off = 0;
  auto r32 = [&]() {
    std::uint32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (is.gcount() != 4) {
      throw IncompleteDataError(path + ": truncated at byte " +
                                std::to_string(off));
    }
    off += 4;
    return v;
  };
  if (r32() != kParamsMagic) throw FormatError(path + ": bad magic", 0);
  if (r32() != 1) throw FormatError(path + ": bad version", 4);
  std::uint32_t count = r32();
  if (count != store.size()) {
    throw FormatError(path + ": param count " + std::to_string(count) +
                          " != expected " + std::to_string(store.size()),
                      8);
  }
  for (auto& p : store) {
    std::uint32_t nlen = r32();
    if (nlen > 4096) throw FormatError(path + ": name too long", off - 4);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    if (static_cast<std::uint32_t>(is.gcount()) != nlen) {
      throw IncompleteDataError(path + ": truncated name");
    }
    off += nlen;
    if (name != p.name) {
      throw FormatError(path + ": param order mismatch, got '" + name +
                            "' expected '" + p.name + "'",
                        off - nlen);
    }
    std::uint32_t rows = r32(), cols = r32();
    if (rows != static_cast<std::uint32_t>(p.value.rows()) ||
        cols != static_cast<std::uint32_t>(p.value.cols())) {
      throw FormatError(path + ": shape mismatch for " + name, off - 8);
    }
    for (Mat<S>* m : {&p.value, &p.m, &p.v}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) {
        float f;
        is.read(reinterpret_cast<char*>(&f), 4);
        if (is.gcount() != 4) {
          throw IncompleteDataError(path + ": truncated at byte " +
                                    std::to_string(off));
        }
        off += 4;
        (*m)(i) = static_cast<S>(f);
      }
    }
  }
}

}  // namespace nn
}  // namespace doorlab

#endif  // DOORLAB_NN_HPP_
