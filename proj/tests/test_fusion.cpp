#include <doctest.h>

#include <cmath>

#include "edgpat/fusion.hpp"
#include "edgpat/replay.hpp"
#include "edgpat/synth.hpp"

using namespace edgpat;

namespace {

ModelParams tiny_params(int d, const Taxonomy& tax, int companies, Ablations abl = {}) {
  ModelDims dims;
  dims.d = d;
  dims.d_time = 2;
  dims.levels = tax.depth();
  dims.companies = companies;
  dims.leaves = tax.num_leaves();
  return ModelParams(dims, abl);
}

Vec run_mlp(const Mlp& mlp, const Vec& x) {
  Vec hidden = (mlp.w1.value * x + mlp.b1.value.col(0)).cwiseMax(0.0);
  return mlp.w2.value * hidden + mlp.b2.value.col(0);
}

}  // namespace

TEST_CASE("company preference: gated mix endpoints") {
  Taxonomy tax = make_taxonomy({1, 2});
  ModelParams params = tiny_params(2, tax, 1);
  Rng rng(19);
  params.init(rng);
  MemoryState mem(1, 2, 1, 2, 0.0);
  mem.company_mem.row(0) << 0.3, -0.8;
  ScoringContext ctx;

  auto preference = [&]() {
    ad::Tape tape(false);
    return tape.value(company_preference(tape, params, mem, 0, ctx));
  };

  // Gate at 0.5 (raw 0): head applied to (mem + static)/2.
  params.gate_company.value(0, 0) = 0.0;
  Vec mixed = 0.5 * mem.company_mem.row(0).transpose() +
              0.5 * params.static_company.value.row(0).transpose();
  CHECK((preference() - run_mlp(params.company_head, mixed)).norm() < 1e-12);

  // Fresh memory, gate 0.5: head over half the static row.
  mem.company_mem.setZero();
  Vec half_static = 0.5 * params.static_company.value.row(0).transpose();
  CHECK((preference() - run_mlp(params.company_head, half_static)).norm() < 1e-12);

  // Saturated gate: pure dynamic side.
  mem.company_mem.row(0) << 0.3, -0.8;
  params.gate_company.value(0, 0) = 50.0;
  CHECK((preference() - run_mlp(params.company_head, mem.company_mem.row(0).transpose()))
            .norm() < 1e-9);

  // sif ablation: static side forced to zero.
  Ablations sif;
  sif.sif = true;
  ModelParams ablated = tiny_params(2, tax, 1, sif);
  ablated.company_head = params.company_head;
  ablated.gate_company.value(0, 0) = 0.0;
  ad::Tape tape(false);
  Vec got = tape.value(company_preference(tape, ablated, mem, 0, ctx));
  CHECK((got - run_mlp(params.company_head, 0.5 * mem.company_mem.row(0).transpose())).norm() <
        1e-12);
}

TEST_CASE("code representation: three branches, exactly one per leaf") {
  Taxonomy tax = make_taxonomy({1, 2, 2});  // 4 leaves
  ModelParams params = tiny_params(2, tax, 2);
  Rng rng(23);
  params.init(rng);

  MemoryState mem(2, 4, 3, 2, 0.0);
  InteractionHistory history(2);
  history.observe(EventItem{"p0", 0, {1}, 1.0});  // leaf 1 is historical for company 0

  // Leaf 0 is in the current event; run it through a real batch so the
  // updated var exists on the tape.
  std::vector<EventItem> batch{EventItem{"p1", 0, {0}, 2.0}};
  ad::Tape tape(true);
  BatchUpdates updates = replay_batch(tape, params, tax, mem, batch);
  history.observe(batch[0]);

  std::vector<int> current{0};
  ScoringContext ctx;
  ctx.updated_companies = &updates.companies;
  ctx.updated_leaves = &updates.leaves;
  ctx.updated_nodes = &updates.nodes;
  ctx.current_codes = &current;

  BranchCounts counts;
  std::vector<Vec> reprs;
  for (int leaf = 0; leaf < 4; ++leaf)
    reprs.push_back(tape.value(
        code_representation(tape, params, mem, history, 0, leaf, ctx, &counts)));

  CHECK(counts.current == 1);
  CHECK(counts.historical == 1);
  CHECK(counts.fresh == 2);
  CHECK(counts.total() == 4);

  // Never-interacted leaves come back as the static rows, bitwise.
  CHECK(reprs[2] == params.static_leaf.value.row(2).transpose());
  CHECK(reprs[3] == params.static_leaf.value.row(3).transpose());

  // Current leaf: gate-mixed updated memory and static row.
  const double gate = 1.0 / (1.0 + std::exp(-params.gate_leaf.value(0, 0)));
  Vec expect_current = gate * mem.leaf_mem.row(0).transpose() +
                       (1 - gate) * params.static_leaf.value.row(0).transpose();
  CHECK((reprs[0] - expect_current).norm() < 1e-12);

  // Historical leaf: gate-mixed history head over the stored memory.
  const double gate1 = 1.0 / (1.0 + std::exp(-params.gate_leaf.value(1, 0)));
  Vec expect_hist = gate1 * run_mlp(params.history_head, mem.leaf_mem.row(1).transpose()) +
                    (1 - gate1) * params.static_leaf.value.row(1).transpose();
  CHECK((reprs[1] - expect_hist).norm() < 1e-12);
}

TEST_CASE("code representation: historical zero memory, zero-bias head, gate half") {
  Taxonomy tax = make_taxonomy({1, 2});
  ModelParams params = tiny_params(2, tax, 1);
  Rng rng(29);
  params.init(rng);
  // Zero the history head so MLP(0) = 0, and center the gate.
  params.history_head.w1.value.setZero();
  params.history_head.b1.value.setZero();
  params.history_head.w2.value.setZero();
  params.history_head.b2.value.setZero();
  params.gate_leaf.value.setZero();

  MemoryState mem(1, 2, 1, 2, 0.0);
  InteractionHistory history(1);
  history.observe(EventItem{"p", 0, {0}, 1.0});

  ad::Tape tape(false);
  ScoringContext ctx;
  Vec repr = tape.value(code_representation(tape, params, mem, history, 0, 0, ctx));
  CHECK((repr - 0.5 * params.static_leaf.value.row(0).transpose()).norm() == 0.0);
}

TEST_CASE("code representation: current leaf without a tape update is an error") {
  Taxonomy tax = make_taxonomy({1, 2});
  ModelParams params = tiny_params(2, tax, 1);
  MemoryState mem(1, 2, 1, 2, 0.0);
  InteractionHistory history(1);
  std::vector<int> current{0};
  ScoringContext ctx;
  ctx.current_codes = &current;
  ad::Tape tape(true);
  CHECK_THROWS_AS(code_representation(tape, params, mem, history, 0, 0, ctx), NumericError);
}

TEST_CASE("hierarchical mix: linear combination of ancestors") {
  Taxonomy tax = make_taxonomy({1, 1, 1});  // single chain, L=3
  ModelParams params = tiny_params(2, tax, 1);
  MemoryState mem(1, 1, 2, 2, 0.0);
  ScoringContext ctx;

  Vec z = (Vec(2) << 0.5, -1.0).finished();
  mem.node_mem.row(0) << 1.0, 2.0;   // level 1
  mem.node_mem.row(1) << -3.0, 4.0;  // level 2

  // lambda = ones: a + b + Z.
  params.level_weights.value.setOnes();
  ad::Tape tape(false);
  Vec mixed = tape.value(hierarchical_mix(tape, params, tax, mem, 0, tape.constant(z), ctx));
  CHECK(mixed(0) == doctest::Approx(0.5 + 1.0 - 3.0));
  CHECK(mixed(1) == doctest::Approx(-1.0 + 2.0 + 4.0));

  // One-hot at the leaf level: identity on Z.
  params.level_weights.value.setZero();
  params.level_weights.value(2, 0) = 1.0;
  Vec only_z = tape.value(hierarchical_mix(tape, params, tax, mem, 0, tape.constant(z), ctx));
  CHECK((only_z - z).norm() == 0.0);

  // All node memories zero: lambda_L * Z.
  mem.node_mem.setZero();
  params.level_weights.value.setConstant(0.25);
  Vec scaled = tape.value(hierarchical_mix(tape, params, tax, mem, 0, tape.constant(z), ctx));
  CHECK((scaled - 0.25 * z).norm() < 1e-15);
}

TEST_CASE("score: zero output head gives 0.5 everywhere; symmetry for twin leaves") {
  Taxonomy tax = make_taxonomy({1, 1, 2});  // 2 leaves sharing the whole chain
  ModelParams params = tiny_params(2, tax, 1);
  Rng rng(31);
  params.init(rng);
  params.output_head.w1.value.setZero();
  params.output_head.b1.value.setZero();
  params.output_head.w2.value.setZero();
  params.output_head.b2.value.setZero();

  MemoryState mem(1, 2, 2, 2, 0.0);
  InteractionHistory history(1);
  ad::Tape tape(false);
  ScoringContext ctx;
  Vec probs = score_probabilities(tape, params, tax, mem, history, 0, ctx);
  CHECK(probs(0) == 0.5);
  CHECK(probs(1) == 0.5);

  // Twin never-interacted leaves: identical static rows force identical scores.
  Rng rng2(33);
  params.init(rng2);
  params.static_leaf.value.row(1) = params.static_leaf.value.row(0);
  params.gate_leaf.value(1, 0) = params.gate_leaf.value(0, 0);
  ad::Tape tape2(false);
  Vec probs2 = score_probabilities(tape2, params, tax, mem, history, 0, ctx);
  CHECK(probs2(0) == probs2(1));
  CHECK(probs2(0) > 0.0);
  CHECK(probs2(0) < 1.0);
}

TEST_CASE("score: d=1 closed form through the whole fusing stage") {
  Taxonomy tax = make_taxonomy({1, 2});  // root + 2 leaves, L=2
  ModelParams params = tiny_params(1, tax, 1);
  params.time_w.value.setZero();
  params.time_b.value.setZero();

  auto set_mlp = [](Mlp& mlp, double w1, double b1, double w2, double b2) {
    mlp.w1.value.setConstant(w1);
    mlp.b1.value.setConstant(b1);
    mlp.w2.value.setConstant(w2);
    mlp.b2.value.setConstant(b2);
  };
  set_mlp(params.company_head, 1.5, 0.2, -0.8, 0.1);
  set_mlp(params.history_head, 0.9, -0.1, 1.1, 0.0);
  set_mlp(params.output_head, 2.0, 0.0, 1.0, -0.2);
  params.static_company.value << 0.4;
  params.static_leaf.value << -0.6, 0.7;
  params.gate_company.value << 0.3;
  params.gate_leaf.value << -0.2, 0.5;
  params.level_weights.value << 0.6, 1.2;

  MemoryState mem(1, 2, 1, 1, 0.0);
  mem.company_mem(0, 0) = 0.25;
  mem.leaf_mem(0, 0) = -0.5;
  mem.node_mem(0, 0) = 0.15;
  InteractionHistory history(1);
  history.observe(EventItem{"p", 0, {0}, 1.0});

  ad::Tape tape(false);
  ScoringContext ctx;
  Vec probs = score_probabilities(tape, params, tax, mem, history, 0, ctx);

  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto mlp1 = [](double w1, double b1, double w2, double b2, double x) {
    return w2 * std::max(0.0, w1 * x + b1) + b2;
  };
  const double gu = sigmoid(0.3);
  const double zu = mlp1(1.5, 0.2, -0.8, 0.1, gu * 0.25 + (1 - gu) * 0.4);
  // Leaf 0: historical branch.
  const double g0 = sigmoid(-0.2);
  const double z0 = g0 * mlp1(0.9, -0.1, 1.1, 0.0, -0.5) + (1 - g0) * -0.6;
  const double c0 = 1.2 * z0 + 0.6 * 0.15;
  const double p0 = sigmoid(mlp1(2.0, 0.0, 1.0, -0.2, zu + c0));
  // Leaf 1: never interacted.
  const double c1 = 1.2 * 0.7 + 0.6 * 0.15;
  const double p1 = sigmoid(mlp1(2.0, 0.0, 1.0, -0.2, zu + c1));

  CHECK(probs(0) == doctest::Approx(p0).epsilon(1e-12));
  CHECK(probs(1) == doctest::Approx(p1).epsilon(1e-12));
}

TEST_CASE("sif ablation: fresh leaves have company-independent representations") {
  Taxonomy tax = make_taxonomy({1, 3});
  Ablations sif;
  sif.sif = true;
  ModelParams params = tiny_params(2, tax, 2, sif);
  Rng rng(41);
  params.init(rng);

  MemoryState mem(2, 3, 1, 2, 0.0);
  InteractionHistory history(2);
  ad::Tape tape(false);
  ScoringContext ctx;
  BranchCounts counts;
  Vec repr = tape.value(code_representation(tape, params, mem, history, 0, 1, ctx, &counts));
  CHECK(repr.norm() == 0.0);  // static side gone, never interacted
  CHECK(counts.fresh == 1);
}

TEST_CASE("cold company: score order depends only on statics and level weights") {
  Taxonomy tax = make_taxonomy({2, 2});
  ModelParams params = tiny_params(2, tax, 3);
  Rng rng(47);
  params.init(rng);

  MemoryState mem(3, 4, 2, 2, 0.0);
  InteractionHistory history(3);

  auto ranking_for = [&](ModelParams& p, MemoryState& m) {
    ad::Tape tape(false);
    ScoringContext ctx;
    Vec probs = score_probabilities(tape, p, tax, m, history, 0, ctx);
    std::vector<int> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (probs(a) != probs(b)) return probs(a) > probs(b);
      return a < b;
    });
    return order;
  };
  auto base = ranking_for(params, mem);

  // Perturb everything specific to *other* companies: their memories,
  // their static rows, their gates. Company 0's ranking cannot move.
  mem.company_mem.row(1) << 9.0, -9.0;
  mem.company_mem.row(2) << -4.0, 4.0;
  params.static_company.value.row(1) << 7.0, 7.0;
  params.gate_company.value(2, 0) = 3.0;
  CHECK(ranking_for(params, mem) == base);
}
