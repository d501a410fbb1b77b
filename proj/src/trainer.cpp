#include "edgpat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

namespace edgpat {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (max_epochs < 0) throw ConfigError("train: max_epochs must be >= 0");
  if (hidden_dim < 1) throw ConfigError("train: hidden_dim must be >= 1");
  if (effective_time_dim() % 2 != 0) throw ConfigError("train: time_dim must be even");
  if (dropout < 0 || dropout >= 1) throw ConfigError("train: dropout must be in [0, 1)");
  if (window_seconds <= 0) throw ConfigError("train: label window must be positive");
  if (negative_samples < 0) throw ConfigError("train: negative_samples must be >= 0");
}

double bce_loss(const Vec& scores, std::span<const int> positives, double eps) {
  double total = 0;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    const double p_hat = std::clamp(scores(j), eps, 1.0 - eps);
    const bool positive = std::binary_search(positives.begin(), positives.end(), static_cast<int>(j));
    total -= positive ? std::log(p_hat) : std::log(1.0 - p_hat);
  }
  return total;
}

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(ModelParams& params, long t) const {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params.visit([&](ad::Tensor& p) {
      p.m1 = beta1 * p.m1 + (1.0 - beta1) * p.grad;
      p.m2 = beta2 * p.m2 + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          lr * (p.m1.array() / bc1) / ((p.m2.array() / bc2).sqrt() + eps);
    });
  }
};

// Per-company chronological timeline for label-window queries.
struct Timelines {
  std::vector<std::vector<std::pair<double, const std::vector<int>*>>> rows;

  explicit Timelines(const Dataset& dataset) : rows(dataset.num_companies()) {
    for (const Event& ev : dataset.events)
      for (int c : ev.companies) rows[c].emplace_back(ev.timestamp, &ev.codes);
  }

  std::vector<int> positives_in_window(int company, double anchor, double window) const {
    std::set<int> acc;
    const auto& row = rows[company];
    auto it = std::upper_bound(row.begin(), row.end(), anchor,
                               [](double t, const auto& entry) { return t < entry.first; });
    for (; it != row.end() && it->first <= anchor + window; ++it)
      acc.insert(it->second->begin(), it->second->end());
    return {acc.begin(), acc.end()};
  }
};

struct CompanyBatchInfo {
  double anchor = 0;
  std::vector<int> current_codes;  // codes of the company's items at the anchor time
};

// Leaves picked for a negative-sampled loss: all positives plus
// `per_positive` random negatives for each positive.
std::vector<int> sampled_leaves(const std::vector<int>& positives, int n, int per_positive,
                                Rng& rng) {
  std::set<int> chosen(positives.begin(), positives.end());
  const int want = static_cast<int>(positives.size()) * per_positive;
  int guard = 20 * want + 100;
  while (static_cast<int>(chosen.size()) < static_cast<int>(positives.size()) + want &&
         guard-- > 0 && static_cast<int>(chosen.size()) < n)
    chosen.insert(rng.index(n));
  return {chosen.begin(), chosen.end()};
}

}  // namespace

BatchLoss build_batch_loss(ad::Tape& tape, ModelParams& params, const Dataset& dataset,
                           std::span<const EventItem> batch, MemoryState& mem,
                           InteractionHistory& history, const TrainConfig& config, Rng& rng) {
  const Taxonomy& taxonomy = *dataset.taxonomy;
  const Timelines timelines(dataset);
  BatchUpdates updates = replay_batch(tape, params, taxonomy, mem, batch, config.aggregation);

  // Batch companies, their anchors, and the codes of their anchor-time
  // items (the "current event" for the gamma branch).
  std::map<int, CompanyBatchInfo> batch_companies;
  for (const EventItem& item : batch) {
    history.observe(item);
    auto& info = batch_companies[item.company];
    if (item.timestamp > info.anchor) {
      info.anchor = item.timestamp;
      info.current_codes = item.codes;
    } else if (item.timestamp == info.anchor) {
      std::vector<int> merged;
      std::set_union(info.current_codes.begin(), info.current_codes.end(), item.codes.begin(),
                     item.codes.end(), std::back_inserter(merged));
      info.current_codes = std::move(merged);
    }
  }

  BatchLoss result;
  std::vector<ad::Var> losses;
  for (auto& [company, info] : batch_companies) {
    auto positives = timelines.positives_in_window(company, info.anchor, config.window_seconds);
    ScoringContext ctx;
    ctx.updated_companies = &updates.companies;
    ctx.updated_leaves = &updates.leaves;
    ctx.updated_nodes = &updates.nodes;
    ctx.current_codes = &info.current_codes;
    ctx.dropout = config.dropout;
    ctx.rng = &rng;

    if (config.negative_samples > 0) {
      // Subset loss: only the positives and sampled negatives are scored.
      auto leaves = sampled_leaves(positives, dataset.num_leaves(), config.negative_samples, rng);
      ad::Var preference = company_preference(tape, params, mem, company, ctx);
      for (int leaf : leaves) {
        ad::Var repr = code_representation(tape, params, mem, history, company, leaf, ctx);
        ad::Var fused = hierarchical_mix(tape, params, taxonomy, mem, leaf, repr, ctx);
        ad::Var summed = tape.add(preference, fused);
        ad::Var logit = ctx.dropout > 0.0
                            ? params.output_head.apply_dropout(tape, summed, ctx.dropout, rng)
                            : params.output_head.apply(tape, summed);
        const bool is_positive = std::binary_search(positives.begin(), positives.end(), leaf);
        losses.push_back(tape.bce_with_logits(logit, is_positive ? 1.0 : 0.0));
        ++result.elements;
      }
      continue;
    }

    auto logits = score_logits(tape, params, taxonomy, mem, history, company, ctx);
    for (int leaf = 0; leaf < dataset.num_leaves(); ++leaf) {
      const bool is_positive = std::binary_search(positives.begin(), positives.end(), leaf);
      losses.push_back(tape.bce_with_logits(logits[leaf], is_positive ? 1.0 : 0.0));
    }
    result.elements += dataset.num_leaves();
  }

  result.total = losses.empty() ? tape.zeros(1) : tape.sum(losses);
  return result;
}

double train_epoch(const Dataset& dataset, const TrainConfig& config, TrainState& state,
                   MemoryState& mem, InteractionHistory& history, int epoch) {
  const Splits& sp = dataset.require_splits();

  std::vector<Event> train_events;
  for (const Event& ev : dataset.events) {
    if (ev.timestamp > sp.train_end) break;
    train_events.push_back(ev);
  }
  if (train_events.empty()) throw DataError("train: empty training span");
  const auto items = split_events(train_events);

  Adam adam{config.learning_rate};
  Rng epoch_rng = Rng(config.seed).fork(0xe70c).fork(static_cast<std::uint64_t>(epoch));

  double loss_sum = 0;
  std::size_t loss_elements = 0;

  for (std::size_t begin = 0; begin < items.size(); begin += config.batch_size) {
    const std::size_t end = std::min(items.size(), begin + config.batch_size);
    const std::span<const EventItem> batch(items.data() + begin, end - begin);

    ad::Tape tape(/*recording=*/true);
    Rng batch_rng = epoch_rng.fork(begin);
    BatchLoss bl = build_batch_loss(tape, state.params, dataset, batch, mem, history, config,
                                    batch_rng);
    if (bl.elements == 0) continue;

    const double batch_loss = tape.value(bl.total)(0);
    if (!std::isfinite(batch_loss))
      throw NumericError("train: non-finite loss in batch starting at item " +
                         std::to_string(begin) + " (t=" +
                         std::to_string(batch.front().timestamp) + ")");
    loss_sum += batch_loss;
    loss_elements += bl.elements;

    state.params.zero_grads();
    tape.backward(bl.total);
    adam.step(state.params, ++state.adam_step);
  }

  return loss_elements == 0 ? 0.0 : loss_sum / static_cast<double>(loss_elements);
}

TrainState fit(const Dataset& dataset, const TrainConfig& config,
               const std::function<void(const EpochLog&)>& progress) {
  config.validate();
  const Taxonomy& taxonomy = *dataset.taxonomy;
  if (taxonomy.depth() < 2) throw ConfigError("train: taxonomy depth must be >= 2");

  ModelDims dims;
  dims.d = config.hidden_dim;
  dims.d_time = config.effective_time_dim();
  dims.levels = taxonomy.depth();
  dims.companies = dataset.num_companies();
  dims.leaves = dataset.num_leaves();

  TrainState state;
  state.params = ModelParams(dims, config.ablations);
  Rng init_rng(config.seed);
  state.params.init(init_rng);
  state.best_params = state.params;
  state.memory = MemoryState(dims.companies, dims.leaves, taxonomy.num_interior(), dims.d,
                             dataset.start_time());

  EvalOptions val_options;
  val_options.span = EvalSpan::kValidation;
  val_options.ks = {config.val_recall_k};
  val_options.batch_size = config.eval_batch_size;
  val_options.aggregation = config.aggregation;

  InteractionHistory history(dims.companies);
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!config.persist_memory) {
      state.memory.reset(dims.companies, dims.leaves, taxonomy.num_interior(), dims.d,
                         dataset.start_time());
      history = InteractionHistory(dims.companies);
    }
    const double train_loss =
        train_epoch(dataset, config, state, state.memory, history, epoch);

    MetricReport report = evaluate_model(state.params, dataset, val_options);
    const double val_metric = report.recall[config.val_recall_k];

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = train_loss;
    entry.val_metric = val_metric;
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.log.push_back(entry);
    state.epochs_run = epoch;
    if (progress) progress(entry);

    if (val_metric > state.best_val_metric) {
      state.best_val_metric = val_metric;
      state.best_epoch = epoch;
      state.best_params = state.params;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
  }
  return state;
}

}  // namespace edgpat
