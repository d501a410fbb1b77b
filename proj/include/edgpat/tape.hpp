#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edgpat/rng.hpp"
#include "edgpat/types.hpp"

namespace edgpat::ad {

// Named trainable tensor. Vectors are stored as single-column matrices;
// per-entity scalars (gates) as column vectors. `grad` accumulates across
// one tape; `m1`/`m2` are the optimizer's moment estimates.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;
  Mat m1, m2;

  Tensor() = default;
  Tensor(std::string n, int rows, int cols) : name(std::move(n)) { resize(rows, cols); }

  void resize(int rows, int cols) {
    value = Mat::Zero(rows, cols);
    grad = Mat::Zero(rows, cols);
    m1 = Mat::Zero(rows, cols);
    m2 = Mat::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

// Handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over column vectors. Forward values are always
// computed; backward closures are only recorded when `recording` is true,
// so replay without gradients pays no bookkeeping. One tape per batch:
// build the graph, call backward() on a scalar output, read Tensor::grad.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  int size() const { return static_cast<int>(vals_.size()); }
  void reset();

  const Vec& value(Var v) const { return vals_[v.id]; }
  const Vec& grad(Var v) const { return grads_[v.id]; }

  // Leaves.
  Var constant(Vec v);
  Var zeros(int n) { return constant(Vec::Zero(n)); }
  Var param_row(Tensor& t, int row);     // one row of a matrix tensor
  Var param_scalar(Tensor& t, int idx);  // size-1 view of a column-vector entry

  // Elementwise and linear algebra.
  Var add(Var a, Var b);
  Var sum(std::span<const Var> xs);
  Var reduce_sum(Var x);  // size-1 sum of one vector's components
  Var mean(std::span<const Var> xs);
  Var concat(std::span<const Var> xs);
  Var cmul(Var a, Var b);
  Var axpb(Var x, double alpha, double beta);  // alpha * x + beta
  Var smul(Var s, Var x);                      // scalar node times vector node
  Var linear(Tensor& w, Var x);                // w.value * x
  Var affine(Tensor& w, Tensor& b, Var x);     // w.value * x + b.value
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var relu(Var x);

  // Inverted dropout on all components; identity when rate == 0.
  Var dropout(Var x, double rate, Rng& rng);

  // Interval encoding, see time_encoding.hpp for the value-level form.
  Var time_encode(double dt, Tensor& w, Tensor& b);

  // Binary cross-entropy against a 0/1 label, taking a size-1 logit.
  // The forward value clamps the probability to [eps, 1-eps]; the gradient
  // is the usual sigmoid(logit) - label.
  Var bce_with_logits(Var logit, double label, double eps = 1e-7);

  // Runs all recorded closures in reverse; `out` must be size-1.
  void backward(Var out);

 private:
  Var push(Vec v);
  void record(std::function<void()> fn) {
    if (recording_) backs_.emplace_back(static_cast<int>(vals_.size()) - 1, std::move(fn));
  }

  std::vector<Vec> vals_;
  std::vector<Vec> grads_;
  std::vector<std::pair<int, std::function<void()>>> backs_;
  bool recording_;
};

}  // namespace edgpat::ad
