#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "edgpat/evaluator.hpp"

namespace edgpat {

struct TrainConfig {
  int batch_size = 200;          // items per batch
  double learning_rate = 1e-4;
  int max_epochs = 300;
  int patience = 10;             // early-stop epochs without improvement
  int hidden_dim = 64;
  int time_dim = 0;              // 0 = hidden_dim
  double dropout = 0.0;
  double window_seconds = kDefaultWindowSeconds;
  Ablations ablations;
  bool persist_memory = false;   // keep training memories across epochs
  int negative_samples = 0;      // 0 = loss over all codes
  AggregationMode aggregation = AggregationMode::kMean;
  std::uint64_t seed = 42;
  int val_recall_k = 10;         // epoch selection metric
  int eval_batch_size = 200;

  int effective_time_dim() const { return time_dim > 0 ? time_dim : hidden_dim; }
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;  // mean cross-entropy per (company, code) element
  double val_metric = 0;  // recall@k on the validation span
  double wall_seconds = 0;
};

struct TrainState {
  ModelParams params;
  MemoryState memory;
  long adam_step = 0;
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val_metric = -1.0;
  ModelParams best_params;
  std::vector<EpochLog> log;
};

// Summed cross-entropy of predicted probabilities against a 0/1 target
// over one company's codes; probabilities are clamped to [eps, 1-eps].
// `positives` must be sorted.
double bce_loss(const Vec& scores, std::span<const int> positives, double eps = 1e-7);

struct BatchLoss {
  ad::Var total;               // summed cross-entropy, size-1 node
  std::size_t elements = 0;    // (company, code) pairs behind the sum
};

// Full forward pass for one batch: memory updates plus the label-window
// loss of every company in the batch, all on one tape. Mutates `mem` and
// `history` exactly like replay; callers that need repeated evaluations
// (e.g. finite differences) pass copies.
BatchLoss build_batch_loss(ad::Tape& tape, ModelParams& params, const Dataset& dataset,
                           std::span<const EventItem> batch, MemoryState& mem,
                           InteractionHistory& history, const TrainConfig& config, Rng& rng);

// One pass over the training items: per batch, encode and apply memory
// updates, score each batch company against its label window anchored at
// its latest item, backpropagate the summed loss, and step the optimizer.
// Returns the epoch's mean per-element loss.
double train_epoch(const Dataset& dataset, const TrainConfig& config, TrainState& state,
                   MemoryState& mem, InteractionHistory& history, int epoch);

// Full training loop with per-epoch validation and early stopping; the
// returned state holds both the final and the best-validation parameters.
// `progress`, when set, receives one line per epoch.
TrainState fit(const Dataset& dataset, const TrainConfig& config,
               const std::function<void(const EpochLog&)>& progress = nullptr);

}  // namespace edgpat
