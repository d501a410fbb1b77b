#pragma once

#include <functional>
#include <string>
#include <vector>

#include "edgpat/nn.hpp"
#include "edgpat/taxonomy.hpp"

namespace edgpat {

// Component switches. Each disables one part of the model while keeping
// the rest intact:
//   mi  - cross-entity inputs in the company/leaf message encoders are
//         replaced by zero vectors (messages depend on own memory + time)
//   sif - static embeddings contribute zero in the fusing stage
//   hmp - taxonomy node memories are never written and the leaf message
//         encoder drops its parent-memory slot (smaller input arity)
//   tie - the interval encoding is replaced by a zero vector everywhere
struct Ablations {
  bool mi = false;
  bool sif = false;
  bool hmp = false;
  bool tie = false;
};

struct ModelDims {
  int d = 64;        // hidden size
  int d_time = 64;   // interval-encoding size, even
  int levels = 5;    // taxonomy depth L
  int companies = 0; // m
  int leaves = 0;    // n
};

// Every trainable tensor in the model. Shapes depend on the ablation set
// (the leaf encoder loses its hierarchy slot under hmp), so the ablations
// are fixed at construction time.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(const ModelDims& dims, const Ablations& ablations);

  void init(Rng& rng);

  const ModelDims& dims() const { return dims_; }
  const Ablations& ablations() const { return ablations_; }

  // Enumerates all tensors in a stable order (used by the optimizer,
  // checkpointing, and the finite-difference harness).
  void visit(const std::function<void(ad::Tensor&)>& fn);
  void visit(const std::function<void(const ad::Tensor&)>& fn) const;

  void zero_grads();
  ad::Tensor* find(const std::string& name);

  // Interval encoder.
  ad::Tensor time_w, time_b;

  // Message encoders and memory updaters.
  Mlp msg_company;                 // [codes-mean | company mem | time] -> d
  Mlp msg_leaf;                    // [company mem | leaf mem | time | parent mem] -> d
  std::vector<Mlp> msg_node;       // per level 1..L-1: [adjacent | own mem | time] -> d
  GruCell gru_company, gru_leaf;
  std::vector<GruCell> gru_node;   // per level 1..L-1

  // Fusing stage.
  ad::Tensor static_company;       // m x d
  ad::Tensor static_leaf;          // n x d
  ad::Tensor gate_company;         // m raw gates, squashed to (0,1) on use
  ad::Tensor gate_leaf;            // n raw gates
  ad::Tensor level_weights;        // L scalars
  Mlp history_head;                // d -> d, applied to historical leaf memories
  Mlp company_head;                // d -> d
  Mlp output_head;                 // d -> 1, logit

  int leaf_msg_arity() const;
  int node_msg_arity(int level) const;  // level in 1..L-1

 private:
  ModelDims dims_;
  Ablations ablations_;
};

Ablations parse_ablations(const std::string& csv);  // "mi,sif,hmp,tie" subset
std::string ablations_to_string(const Ablations& a);

}  // namespace edgpat
