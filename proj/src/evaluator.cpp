#include "edgpat/evaluator.hpp"

#include <algorithm>
#include <set>

namespace edgpat {

std::pair<double, double> span_bounds(const Dataset& dataset, EvalSpan span) {
  const Splits& sp = dataset.require_splits();
  if (span == EvalSpan::kValidation) return {sp.train_end, sp.val_end};
  return {sp.val_end, sp.test_end};
}

std::vector<std::vector<int>> span_truth(const Dataset& dataset, double begin, double end) {
  std::vector<std::set<int>> acc(dataset.num_companies());
  for (const Event& ev : dataset.events) {
    if (ev.timestamp <= begin) continue;
    if (ev.timestamp > end) break;
    for (int c : ev.companies) acc[c].insert(ev.codes.begin(), ev.codes.end());
  }
  std::vector<std::vector<int>> truth(dataset.num_companies());
  for (int c = 0; c < dataset.num_companies(); ++c)
    truth[c].assign(acc[c].begin(), acc[c].end());
  return truth;
}

Vec map_scores_to_level(const Taxonomy& taxonomy, const Vec& leaf_scores, int level) {
  if (level == 0 || level == taxonomy.depth()) return leaf_scores;
  const auto& nodes = taxonomy.nodes_at_level(level);
  Vec pooled = Vec::Constant(static_cast<Eigen::Index>(nodes.size()),
                             -std::numeric_limits<double>::infinity());
  for (int leaf = 0; leaf < taxonomy.num_leaves(); ++leaf) {
    int pos = taxonomy.level_position(taxonomy.ancestor_at_level(leaf, level));
    pooled(pos) = std::max(pooled(pos), leaf_scores(leaf));
  }
  return pooled;
}

std::vector<int> map_truth_to_level(const Taxonomy& taxonomy, const std::vector<int>& leaves,
                                    int level) {
  if (level == 0 || level == taxonomy.depth()) return leaves;
  std::set<int> mapped;
  for (int leaf : leaves)
    mapped.insert(taxonomy.level_position(taxonomy.ancestor_at_level(leaf, level)));
  return {mapped.begin(), mapped.end()};
}

namespace {

int max_k(const EvalOptions& options) {
  return *std::max_element(options.ks.begin(), options.ks.end());
}

// Replays items in batches; calls `score_now(company)` right after the
// batch containing that company's last item.
template <typename ScoreFn>
void replay_and_score(ModelParams& params, const Dataset& dataset,
                      const std::vector<EventItem>& items, int batch_size,
                      AggregationMode aggregation, MemoryState& mem, InteractionHistory& history,
                      ScoreFn&& score_now) {
  std::vector<int> last_item_of_company(dataset.num_companies(), -1);
  for (int i = 0; i < static_cast<int>(items.size()); ++i)
    last_item_of_company[items[i].company] = i;

  const Taxonomy& taxonomy = *dataset.taxonomy;
  for (std::size_t begin = 0; begin < items.size(); begin += batch_size) {
    const std::size_t end = std::min(items.size(), begin + batch_size);
    ad::Tape tape(/*recording=*/false);
    replay_batch(tape, params, taxonomy, mem,
                 std::span<const EventItem>(items.data() + begin, end - begin), aggregation);
    std::vector<int> due;
    for (std::size_t i = begin; i < end; ++i) {
      history.observe(items[i]);
      if (last_item_of_company[items[i].company] == static_cast<int>(i))
        due.push_back(items[i].company);
    }
    std::sort(due.begin(), due.end());
    due.erase(std::unique(due.begin(), due.end()), due.end());
    for (int company : due) score_now(company);
  }
}

std::vector<RankedPrediction> rank_companies(ModelParams& params, const Dataset& dataset,
                                             const std::vector<EventItem>& items, int batch_size,
                                             AggregationMode aggregation, int level, int k_max) {
  const Taxonomy& taxonomy = *dataset.taxonomy;
  MemoryState mem(dataset.num_companies(), dataset.num_leaves(), taxonomy.num_interior(),
                  params.dims().d, dataset.start_time());
  InteractionHistory history(dataset.num_companies());

  std::vector<RankedPrediction> preds(dataset.num_companies());
  std::vector<char> scored(dataset.num_companies(), 0);
  auto score_company = [&](int company) {
    ad::Tape tape(/*recording=*/false);
    ScoringContext ctx;  // no current event, no tape-linked updates
    Vec probs = score_probabilities(tape, params, taxonomy, mem, history, company, ctx);
    preds[company] = make_ranked(company, map_scores_to_level(taxonomy, probs, level), k_max);
    scored[company] = 1;
  };

  replay_and_score(params, dataset, items, batch_size, aggregation, mem, history, score_company);

  // Companies with no replayed activity: cold scores over the final state.
  for (int c = 0; c < dataset.num_companies(); ++c)
    if (!scored[c]) score_company(c);
  return preds;
}

}  // namespace

std::vector<RankedPrediction> predict_with_model(ModelParams& params, const Dataset& dataset,
                                                 const EvalOptions& options) {
  const Splits& sp = dataset.require_splits();
  double replay_end = sp.train_end;
  if (options.span == EvalSpan::kTest && options.warmup) replay_end = sp.val_end;

  std::vector<Event> pre_span;
  for (const Event& ev : dataset.events) {
    if (ev.timestamp > replay_end) break;
    pre_span.push_back(ev);
  }
  auto items = split_events(pre_span);
  return rank_companies(params, dataset, items, options.batch_size, options.aggregation,
                        options.level, max_k(options));
}

namespace {

MetricReport report_against_span(const Dataset& dataset, const EvalOptions& options,
                                 const std::vector<RankedPrediction>& preds) {
  auto [begin, end] = span_bounds(dataset, options.span);
  if (!(end > begin)) throw ConfigError("evaluate: empty span");
  auto truth = span_truth(dataset, begin, end);
  bool any = false;
  for (const auto& t : truth) any = any || !t.empty();
  if (!any) throw DataError("evaluate: no company has any activity in the requested span");

  std::vector<std::vector<int>> mapped(truth.size());
  for (std::size_t c = 0; c < truth.size(); ++c)
    mapped[c] = map_truth_to_level(*dataset.taxonomy, truth[c], options.level);
  return evaluate_rankings(preds, mapped, options.ks);
}

}  // namespace

MetricReport evaluate_model(ModelParams& params, const Dataset& dataset,
                            const EvalOptions& options) {
  auto preds = predict_with_model(params, dataset, options);
  return report_against_span(dataset, options, preds);
}

MetricReport evaluate_baseline(BaselineKind kind, const Dataset& dataset,
                               const EvalOptions& options) {
  const Splits& sp = dataset.require_splits();
  std::vector<Event> train_events;
  for (const Event& ev : dataset.events) {
    if (ev.timestamp > sp.train_end) break;
    train_events.push_back(ev);
  }
  if (train_events.empty()) throw DataError("evaluate_baseline: empty training span");

  const Taxonomy& taxonomy = *dataset.taxonomy;
  const int n = dataset.num_leaves();
  Vec global = top_frequency_scores(train_events, n);

  std::vector<RankedPrediction> preds(dataset.num_companies());
  for (int c = 0; c < dataset.num_companies(); ++c) {
    Vec scores = (kind == BaselineKind::kTop) ? global
                                              : personal_top_scores(train_events, c, n);
    preds[c] = make_ranked(c, map_scores_to_level(taxonomy, scores, options.level),
                           max_k(options));
  }
  return report_against_span(dataset, options, preds);
}

std::vector<RankedPrediction> predict_current(ModelParams& params, const Dataset& dataset,
                                              const std::vector<int>& companies, int k_max,
                                              int batch_size, AggregationMode aggregation) {
  const Taxonomy& taxonomy = *dataset.taxonomy;
  MemoryState mem(dataset.num_companies(), dataset.num_leaves(), taxonomy.num_interior(),
                  params.dims().d, dataset.start_time());
  InteractionHistory history(dataset.num_companies());
  auto items = split_events(dataset.events);
  for (std::size_t begin = 0; begin < items.size(); begin += batch_size) {
    const std::size_t end = std::min(items.size(), begin + batch_size);
    ad::Tape tape(/*recording=*/false);
    replay_batch(tape, params, taxonomy, mem,
                 std::span<const EventItem>(items.data() + begin, end - begin), aggregation);
    for (std::size_t i = begin; i < end; ++i) history.observe(items[i]);
  }

  std::vector<RankedPrediction> preds;
  preds.reserve(companies.size());
  for (int company : companies) {
    ad::Tape tape(/*recording=*/false);
    ScoringContext ctx;
    Vec probs = score_probabilities(tape, params, taxonomy, mem, history, company, ctx);
    preds.push_back(make_ranked(company, std::move(probs), k_max));
  }
  return preds;
}

}  // namespace edgpat
