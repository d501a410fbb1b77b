#pragma once

#include "edgpat/dataset.hpp"
#include "edgpat/fusion.hpp"
#include "edgpat/metrics.hpp"
#include "edgpat/replay.hpp"

namespace edgpat {

enum class EvalSpan { kValidation, kTest };

struct EvalOptions {
  EvalSpan span = EvalSpan::kValidation;
  // Replay validation-span events (without training) before scoring the
  // test span, so memories are current at test time.
  bool warmup = true;
  // 0 evaluates the leaves; 1..L-1 max-pools scores onto that level's
  // ancestors and maps the truth the same way.
  int level = 0;
  std::vector<int> ks = {10, 20, 30, 40};
  int batch_size = 200;
  AggregationMode aggregation = AggregationMode::kMean;
};

// (begin, end] timestamps of the span to predict.
std::pair<double, double> span_bounds(const Dataset& dataset, EvalSpan span);

// Per-company code sets applied inside (begin, end], indexed by company.
std::vector<std::vector<int>> span_truth(const Dataset& dataset, double begin, double end);

// Max-pools leaf scores onto the level's nodes (indexed by their id-sorted
// position within the level).
Vec map_scores_to_level(const Taxonomy& taxonomy, const Vec& leaf_scores, int level);
std::vector<int> map_truth_to_level(const Taxonomy& taxonomy, const std::vector<int>& leaves,
                                    int level);

// Replays every pre-span event through the memories and scores each
// company right after the batch containing its last pre-span item (its
// memories as of that moment; no current event, so interacted codes take
// the historical branch). Companies with no pre-span activity are scored
// cold after the replay finishes. Rankings come back ordered by company.
std::vector<RankedPrediction> predict_with_model(ModelParams& params, const Dataset& dataset,
                                                 const EvalOptions& options);

MetricReport evaluate_model(ModelParams& params, const Dataset& dataset,
                            const EvalOptions& options);

enum class BaselineKind { kTop, kPersonalTop };

MetricReport evaluate_baseline(BaselineKind kind, const Dataset& dataset,
                               const EvalOptions& options);

// Scores every listed company at the end of the full event log (top-k
// indices inside each RankedPrediction).
std::vector<RankedPrediction> predict_current(ModelParams& params, const Dataset& dataset,
                                              const std::vector<int>& companies, int k_max,
                                              int batch_size = 200,
                                              AggregationMode aggregation = AggregationMode::kMean);

}  // namespace edgpat
