#pragma once

#include <functional>
#include <string>

#include "edgpat/rng.hpp"
#include "edgpat/tape.hpp"

namespace edgpat {

// Two-layer perceptron: w2 * relu(w1 * x + b1) + b2, hidden width = out of
// w1. Dropout, when enabled, masks the hidden activation.
struct Mlp {
  ad::Tensor w1, b1, w2, b2;

  Mlp() = default;
  Mlp(const std::string& name, int in, int hidden, int out)
      : w1(name + ".w1", hidden, in),
        b1(name + ".b1", hidden, 1),
        w2(name + ".w2", out, hidden),
        b2(name + ".b2", out, 1) {}

  int in_dim() const { return static_cast<int>(w1.value.cols()); }
  int out_dim() const { return static_cast<int>(w2.value.rows()); }

  void init(Rng& rng);
  void visit(const std::function<void(ad::Tensor&)>& fn) {
    fn(w1);
    fn(b1);
    fn(w2);
    fn(b2);
  }

  ad::Var apply(ad::Tape& tape, ad::Var x) {
    return tape.affine(w2, b2, tape.relu(tape.affine(w1, b1, x)));
  }
  ad::Var apply_dropout(ad::Tape& tape, ad::Var x, double rate, Rng& rng) {
    return tape.affine(w2, b2, tape.dropout(tape.relu(tape.affine(w1, b1, x)), rate, rng));
  }
};

// Gated recurrent cell (Cho et al. form):
//   z = sigmoid(wz m + uz h + bz)
//   r = sigmoid(wr m + ur h + br)
//   n = tanh(wn m + un (r .* h) + bn)
//   h' = z .* h + (1 - z) .* n
// With all-zero weights and state, h' is zero: memories stay at the origin
// until a nonzero message arrives.
struct GruCell {
  ad::Tensor wz, uz, bz, wr, ur, br, wn, un, bn;

  GruCell() = default;
  GruCell(const std::string& name, int input, int state)
      : wz(name + ".wz", state, input),
        uz(name + ".uz", state, state),
        bz(name + ".bz", state, 1),
        wr(name + ".wr", state, input),
        ur(name + ".ur", state, state),
        br(name + ".br", state, 1),
        wn(name + ".wn", state, input),
        un(name + ".un", state, state),
        bn(name + ".bn", state, 1) {}

  void init(Rng& rng);
  void visit(const std::function<void(ad::Tensor&)>& fn) {
    fn(wz);
    fn(uz);
    fn(bz);
    fn(wr);
    fn(ur);
    fn(br);
    fn(wn);
    fn(un);
    fn(bn);
  }

  ad::Var step(ad::Tape& t, ad::Var msg, ad::Var state) {
    ad::Var z = t.sigmoid(t.add(t.affine(wz, bz, msg), t.linear(uz, state)));
    ad::Var r = t.sigmoid(t.add(t.affine(wr, br, msg), t.linear(ur, state)));
    ad::Var n = t.tanh(t.add(t.affine(wn, bn, msg), t.linear(un, t.cmul(r, state))));
    ad::Var one_minus_z = t.axpb(z, -1.0, 1.0);
    return t.add(t.cmul(z, state), t.cmul(one_minus_z, n));
  }
};

// Xavier-uniform fill for a weight matrix; biases are left at zero.
void xavier_init(ad::Tensor& t, Rng& rng);

}  // namespace edgpat
