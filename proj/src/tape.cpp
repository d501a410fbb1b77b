#include "edgpat/tape.hpp"

#include <algorithm>
#include <cmath>

namespace edgpat::ad {

void Tape::reset() {
  vals_.clear();
  grads_.clear();
  backs_.clear();
}

Var Tape::push(Vec v) {
  vals_.push_back(std::move(v));
  if (recording_) grads_.emplace_back(Vec::Zero(vals_.back().size()));
  return Var{static_cast<int>(vals_.size()) - 1};
}

Var Tape::constant(Vec v) { return push(std::move(v)); }

Var Tape::param_row(Tensor& t, int row) {
  Var y = push(t.value.row(row).transpose());
  record([this, &t, row, y] { t.grad.row(row) += grads_[y.id].transpose(); });
  return y;
}

Var Tape::param_scalar(Tensor& t, int idx) {
  Var y = push(Vec::Constant(1, t.value(idx, 0)));
  record([this, &t, idx, y] { t.grad(idx, 0) += grads_[y.id](0); });
  return y;
}

Var Tape::add(Var a, Var b) {
  Var y = push(vals_[a.id] + vals_[b.id]);
  record([this, a, b, y] {
    grads_[a.id] += grads_[y.id];
    grads_[b.id] += grads_[y.id];
  });
  return y;
}

Var Tape::sum(std::span<const Var> xs) {
  Vec acc = vals_[xs.front().id];
  for (std::size_t i = 1; i < xs.size(); ++i) acc += vals_[xs[i].id];
  Var y = push(std::move(acc));
  std::vector<Var> parents(xs.begin(), xs.end());
  record([this, parents = std::move(parents), y] {
    for (Var p : parents) grads_[p.id] += grads_[y.id];
  });
  return y;
}

Var Tape::reduce_sum(Var x) {
  Var y = push(Vec::Constant(1, vals_[x.id].sum()));
  record([this, x, y] { grads_[x.id].array() += grads_[y.id](0); });
  return y;
}

Var Tape::mean(std::span<const Var> xs) {
  const double scale = 1.0 / static_cast<double>(xs.size());
  Vec acc = vals_[xs.front().id];
  for (std::size_t i = 1; i < xs.size(); ++i) acc += vals_[xs[i].id];
  Var y = push(acc * scale);
  std::vector<Var> parents(xs.begin(), xs.end());
  record([this, parents = std::move(parents), scale, y] {
    for (Var p : parents) grads_[p.id] += scale * grads_[y.id];
  });
  return y;
}

Var Tape::concat(std::span<const Var> xs) {
  Eigen::Index total = 0;
  for (Var x : xs) total += vals_[x.id].size();
  Vec out(total);
  Eigen::Index off = 0;
  for (Var x : xs) {
    out.segment(off, vals_[x.id].size()) = vals_[x.id];
    off += vals_[x.id].size();
  }
  Var y = push(std::move(out));
  std::vector<Var> parents(xs.begin(), xs.end());
  record([this, parents = std::move(parents), y] {
    Eigen::Index pos = 0;
    for (Var p : parents) {
      grads_[p.id] += grads_[y.id].segment(pos, grads_[p.id].size());
      pos += grads_[p.id].size();
    }
  });
  return y;
}

Var Tape::cmul(Var a, Var b) {
  Var y = push(vals_[a.id].cwiseProduct(vals_[b.id]));
  record([this, a, b, y] {
    grads_[a.id] += grads_[y.id].cwiseProduct(vals_[b.id]);
    grads_[b.id] += grads_[y.id].cwiseProduct(vals_[a.id]);
  });
  return y;
}

Var Tape::axpb(Var x, double alpha, double beta) {
  Var y = push(alpha * vals_[x.id].array() + beta);
  record([this, x, alpha, y] { grads_[x.id] += alpha * grads_[y.id]; });
  return y;
}

Var Tape::smul(Var s, Var x) {
  const double sv = vals_[s.id](0);
  Var y = push(sv * vals_[x.id]);
  record([this, s, x, y, sv] {
    grads_[s.id](0) += grads_[y.id].dot(vals_[x.id]);
    grads_[x.id] += sv * grads_[y.id];
  });
  return y;
}

Var Tape::linear(Tensor& w, Var x) {
  Var y = push(w.value * vals_[x.id]);
  record([this, &w, x, y] {
    w.grad.noalias() += grads_[y.id] * vals_[x.id].transpose();
    grads_[x.id].noalias() += w.value.transpose() * grads_[y.id];
  });
  return y;
}

Var Tape::affine(Tensor& w, Tensor& b, Var x) {
  Var y = push(w.value * vals_[x.id] + b.value.col(0));
  record([this, &w, &b, x, y] {
    w.grad.noalias() += grads_[y.id] * vals_[x.id].transpose();
    b.grad.col(0) += grads_[y.id];
    grads_[x.id].noalias() += w.value.transpose() * grads_[y.id];
  });
  return y;
}

Var Tape::sigmoid(Var x) {
  Var y = push(vals_[x.id].unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }));
  record([this, x, y] {
    const Vec& s = vals_[y.id];
    grads_[x.id].array() += grads_[y.id].array() * s.array() * (1.0 - s.array());
  });
  return y;
}

Var Tape::tanh(Var x) {
  Var y = push(vals_[x.id].array().tanh());
  record([this, x, y] {
    grads_[x.id].array() += grads_[y.id].array() * (1.0 - vals_[y.id].array().square());
  });
  return y;
}

Var Tape::relu(Var x) {
  Var y = push(vals_[x.id].cwiseMax(0.0));
  record([this, x, y] {
    grads_[x.id].array() +=
        grads_[y.id].array() * (vals_[x.id].array() > 0.0).cast<double>();
  });
  return y;
}

Var Tape::dropout(Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) return zeros(static_cast<int>(vals_[x.id].size()));
  const double keep = 1.0 - rate;
  Vec mask(vals_[x.id].size());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  Var y = push(vals_[x.id].cwiseProduct(mask));
  record([this, x, y, mask = std::move(mask)] {
    grads_[x.id] += grads_[y.id].cwiseProduct(mask);
  });
  return y;
}

Var Tape::time_encode(double dt, Tensor& w, Tensor& b) {
  if (dt < 0)
    throw NumericError("time_encode: negative interval (replay order bug?): dt=" +
                       std::to_string(dt));
  const int half = static_cast<int>(w.size());
  const double norm = std::sqrt(1.0 / static_cast<double>(half));
  Vec out(2 * half);
  for (int r = 0; r < half; ++r) {
    const double theta = w.value(r, 0) * dt + b.value(r, 0);
    out(2 * r) = norm * std::cos(theta);
    out(2 * r + 1) = norm * std::sin(theta);
  }
  Var y = push(std::move(out));
  record([this, dt, &w, &b, y, half, norm] {
    const Vec& g = grads_[y.id];
    for (int r = 0; r < half; ++r) {
      const double theta = w.value(r, 0) * dt + b.value(r, 0);
      // d/dtheta of [norm*cos, norm*sin] dotted with the incoming grad.
      const double dtheta =
          norm * (-std::sin(theta) * g(2 * r) + std::cos(theta) * g(2 * r + 1));
      w.grad(r, 0) += dtheta * dt;
      b.grad(r, 0) += dtheta;
    }
  });
  return y;
}

Var Tape::bce_with_logits(Var logit, double label, double eps) {
  const double z = vals_[logit.id](0);
  const double p_hat = std::clamp(1.0 / (1.0 + std::exp(-z)), eps, 1.0 - eps);
  const double loss = -(label * std::log(p_hat) + (1.0 - label) * std::log(1.0 - p_hat));
  Var y = push(Vec::Constant(1, loss));
  record([this, logit, y, z, label] {
    const double s = 1.0 / (1.0 + std::exp(-z));
    grads_[logit.id](0) += (s - label) * grads_[y.id](0);
  });
  return y;
}

void Tape::backward(Var out) {
  if (!recording_) throw NumericError("tape: backward on a non-recording tape");
  if (vals_[out.id].size() != 1) throw NumericError("tape: backward output must be scalar");
  grads_[out.id](0) = 1.0;
  for (auto it = backs_.rbegin(); it != backs_.rend(); ++it) it->second();
}

}  // namespace edgpat::ad
