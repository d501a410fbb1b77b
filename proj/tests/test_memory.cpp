#include <doctest.h>

#include <cmath>
#include <set>

#include "edgpat/memory.hpp"
#include "edgpat/replay.hpp"
#include "edgpat/synth.hpp"
#include "edgpat/time_encoding.hpp"

using namespace edgpat;

namespace {

ModelParams tiny_params(int d, int levels, int companies, int leaves, Ablations abl = {}) {
  ModelDims dims;
  dims.d = d;
  dims.d_time = 2;
  dims.levels = levels;
  dims.companies = companies;
  dims.leaves = leaves;
  return ModelParams(dims, abl);
}

}  // namespace

TEST_CASE("integrate_codes: mean pooling over leaf memories") {
  MemoryState mem(1, 3, 0, 2, 0.0);
  ad::Tape tape(false);

  // Fresh state: zero vector.
  std::vector<int> all{0, 1, 2};
  CHECK(tape.value(integrate_codes(tape, mem, all)).norm() == 0.0);

  mem.leaf_mem.row(0) << 1.0, -2.0;
  mem.leaf_mem.row(1) << -1.0, 2.0;
  std::vector<int> one{0};
  CHECK(tape.value(integrate_codes(tape, mem, one))(0) == 1.0);
  std::vector<int> pair{0, 1};
  CHECK(tape.value(integrate_codes(tape, mem, pair)).norm() == 0.0);

  std::vector<int> none;
  CHECK_THROWS_AS(integrate_codes(tape, mem, none), NumericError);
}

TEST_CASE("company message: hand-evaluated two-layer perceptron, d=2") {
  ModelParams params = tiny_params(2, 2, 1, 2);
  // Hand-set weights; time encoder fixed so h(dt) is known.
  params.time_w.value << 0.0;
  params.time_b.value << 0.0;  // encoding = [1, 0] for any dt
  Mat w1(2, 6), w2(2, 2);
  w1 << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6,
        0.7, 0.8, -0.9, 1.0, 1.1, -1.2;
  w2 << 0.5, -0.25,
        -1.5, 2.0;
  params.msg_company.w1.value = w1;
  params.msg_company.b1.value << 0.05, -0.15;
  params.msg_company.w2.value = w2;
  params.msg_company.b2.value << 0.0, 0.3;

  MemoryState mem(1, 2, 0, 2, 0.0);
  mem.company_mem.row(0) << 0.6, -0.3;
  mem.leaf_mem.row(0) << 0.2, 0.1;
  mem.leaf_mem.row(1) << -0.4, 0.5;
  mem.last_seen_company(0) = 0.0;

  EventItem item{"p", 0, {0, 1}, 86400.0};  // one day later
  ad::Tape tape(false);
  Vec got = tape.value(encode_company_message(tape, params, mem, item).payload);

  // Oracle: explicit loops, independent of the Mlp code path.
  double input[6] = {(0.2 + -0.4) / 2, (0.1 + 0.5) / 2, 0.6, -0.3, 1.0, 0.0};
  double hidden[2];
  for (int i = 0; i < 2; ++i) {
    double acc = params.msg_company.b1.value(i, 0);
    for (int j = 0; j < 6; ++j) acc += w1(i, j) * input[j];
    hidden[i] = std::max(0.0, acc);
  }
  for (int i = 0; i < 2; ++i) {
    double acc = params.msg_company.b2.value(i, 0);
    for (int j = 0; j < 2; ++j) acc += w2(i, j) * hidden[j];
    CHECK(got(i) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("company message: mi ablation zeroes the codes slot") {
  Ablations mi;
  mi.mi = true;
  ModelParams with = tiny_params(2, 2, 1, 2);
  ModelParams without = tiny_params(2, 2, 1, 2, mi);
  Rng rng(3);
  with.init(rng);
  // Same weights on both models.
  without.msg_company = with.msg_company;
  without.time_w = with.time_w;
  without.time_b = with.time_b;

  MemoryState mem(1, 2, 0, 2, 0.0);
  mem.leaf_mem.row(0) << 5.0, -5.0;  // visible only without the ablation
  EventItem item{"p", 0, {0}, 100.0};

  ad::Tape tape(false);
  Vec v_with = tape.value(encode_company_message(tape, with, mem, item).payload);
  Vec v_without = tape.value(encode_company_message(tape, without, mem, item).payload);
  CHECK((v_with - v_without).norm() > 1e-6);

  mem.leaf_mem.row(0).setZero();  // with zero memories the slot is zero anyway
  ad::Tape tape2(false);
  Vec a = tape2.value(encode_company_message(tape2, with, mem, item).payload);
  Vec b = tape2.value(encode_company_message(tape2, without, mem, item).payload);
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("leaf message: fresh state and hmp arity") {
  ModelParams params = tiny_params(2, 3, 1, 2);
  CHECK(params.leaf_msg_arity() == 2 * 2 + 2 + 2);
  Ablations hmp;
  hmp.hmp = true;
  ModelParams ablated = tiny_params(2, 3, 1, 2, hmp);
  CHECK(ablated.leaf_msg_arity() == 2 * 2 + 2);  // parent slot dropped

  MemoryState mem(1, 2, 3, 2, 0.0);
  EventItem item{"p", 0, {0}, 50.0};
  ad::Tape tape(false);
  ad::Var parent = tape.zeros(2);
  // Zero weights: payload is exactly the zero bias path.
  Vec payload = tape.value(encode_leaf_message(tape, params, mem, item, 0, parent).payload);
  CHECK(payload.norm() == 0.0);

  // Missing parent memory is a contract violation when hmp is enabled.
  CHECK_THROWS_AS(encode_leaf_message(tape, params, mem, item, 0, ad::Var{}), NumericError);
  CHECK_NOTHROW(encode_leaf_message(tape, ablated, mem, item, 0, ad::Var{}));
}

TEST_CASE("aggregate_messages: mean and latest modes") {
  ad::Tape tape(false);
  Vec x = (Vec(2) << 1.0, -3.0).finished();
  Message m1{7, tape.constant(x), 10.0};
  Message m2{7, tape.constant(-x), 12.0};
  Message other{8, tape.constant(x), 12.0};

  std::vector<Message> single{m1};
  Message agg1 = aggregate_messages(tape, single);
  CHECK(tape.value(agg1.payload) == x);
  CHECK(agg1.event_time == 10.0);

  std::vector<Message> pair{m1, m2};
  Message agg2 = aggregate_messages(tape, pair);
  CHECK(tape.value(agg2.payload).norm() == 0.0);
  CHECK(agg2.event_time == 12.0);

  std::vector<Message> same{m1, m1};
  CHECK(tape.value(aggregate_messages(tape, same).payload) == x);

  Message latest = aggregate_messages(tape, pair, AggregationMode::kLatest);
  CHECK(tape.value(latest.payload) == -x);

  std::vector<Message> mixed{m1, other};
  CHECK_THROWS_AS(aggregate_messages(tape, mixed), NumericError);
}

TEST_CASE("update_company: scalar GRU hand evaluation") {
  ModelParams params = tiny_params(1, 2, 1, 1);
  auto set = [](ad::Tensor& t, double v) { t.value(0, 0) = v; };
  GruCell& g = params.gru_company;
  set(g.wz, 0.3); set(g.uz, -0.2); set(g.bz, 0.1);
  set(g.wr, -0.4); set(g.ur, 0.5); set(g.br, -0.1);
  set(g.wn, 0.8); set(g.un, 0.6); set(g.bn, 0.05);

  MemoryState mem(1, 1, 0, 1, 0.0);
  mem.company_mem(0, 0) = 0.7;

  ad::Tape tape(false);
  Message msg{0, tape.constant(Vec::Constant(1, -0.9)), 5.0};
  update_company(tape, params, mem, msg);

  // Oracle: gate arithmetic with plain doubles.
  auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double m = -0.9, h = 0.7;
  const double z = sigmoid(0.3 * m + -0.2 * h + 0.1);
  const double r = sigmoid(-0.4 * m + 0.5 * h + -0.1);
  const double n = std::tanh(0.8 * m + 0.6 * (r * h) + 0.05);
  const double expect = z * h + (1 - z) * n;
  CHECK(mem.company_mem(0, 0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(mem.last_seen_company(0) == 5.0);
}

TEST_CASE("updates: zero params keep all memories at zero") {
  SynthConfig cfg;
  cfg.companies = 5;
  cfg.events_per_company = 20;
  Dataset ds = synthesize(cfg, 17).dataset;
  ModelParams params = tiny_params(3, ds.taxonomy->depth(), ds.num_companies(),
                                   ds.num_leaves());
  params.time_w.value.setZero();  // zero everything, including the encoder
  MemoryState mem(ds.num_companies(), ds.num_leaves(), ds.taxonomy->num_interior(), 3,
                  ds.start_time());

  auto items = split_events(ds.events);
  ad::Tape tape(false);
  replay_batch(tape, params, *ds.taxonomy, mem, items);
  // Time encoding is nonzero (cos 0 = 1) but the zero-weight encoders wipe it.
  CHECK(mem.company_mem.norm() == 0.0);
  CHECK(mem.leaf_mem.norm() == 0.0);
  CHECK(mem.node_mem.norm() == 0.0);
}

TEST_CASE("replay: bitwise deterministic and local") {
  SynthConfig cfg;
  cfg.companies = 6;
  cfg.events_per_company = 25;
  cfg.coapply_prob = 0.3;
  Dataset ds = synthesize(cfg, 5).dataset;
  ModelParams params = tiny_params(4, ds.taxonomy->depth(), ds.num_companies(),
                                   ds.num_leaves());
  Rng rng(2);
  params.init(rng);

  auto items = split_events(ds.events);
  auto run = [&]() {
    MemoryState mem(ds.num_companies(), ds.num_leaves(), ds.taxonomy->num_interior(), 4,
                    ds.start_time());
    for (std::size_t b = 0; b < items.size(); b += 16) {
      std::size_t e = std::min(items.size(), b + 16);
      ad::Tape tape(false);
      replay_batch(tape, params, *ds.taxonomy, mem,
                   std::span<const EventItem>(items.data() + b, e - b));
    }
    return mem;
  };
  MemoryState a = run();
  MemoryState b = run();
  CHECK(a.same_values(b));

  // Locality: one item touches only its own company, codes, ancestors.
  MemoryState mem(ds.num_companies(), ds.num_leaves(), ds.taxonomy->num_interior(), 4,
                  ds.start_time());
  MemoryState before = mem;
  ad::Tape tape(false);
  replay_batch(tape, params, *ds.taxonomy, mem,
               std::span<const EventItem>(items.data(), 1));
  const EventItem& item = items[0];
  for (int c = 0; c < ds.num_companies(); ++c)
    if (c != item.company) CHECK(mem.company_mem.row(c) == before.company_mem.row(c));
  for (int leaf = 0; leaf < ds.num_leaves(); ++leaf) {
    bool touched = std::binary_search(item.codes.begin(), item.codes.end(), leaf);
    if (!touched) CHECK(mem.leaf_mem.row(leaf) == before.leaf_mem.row(leaf));
  }
  std::set<int> touched_interior;
  for (int leaf : item.codes)
    for (int node : ds.taxonomy->chain(leaf))
      touched_interior.insert(ds.taxonomy->interior_index(node));
  for (int i = 0; i < ds.taxonomy->num_interior(); ++i)
    if (!touched_interior.count(i)) CHECK(mem.node_mem.row(i) == before.node_mem.row(i));
  CHECK(static_cast<int>(touched_interior.size()) <=
        static_cast<int>(item.codes.size()) * (ds.taxonomy->depth() - 1));
}

TEST_CASE("tie ablation: uniform time shifts change nothing") {
  SynthConfig cfg;
  cfg.companies = 4;
  cfg.events_per_company = 15;
  Dataset ds = synthesize(cfg, 9).dataset;
  Ablations tie;
  tie.tie = true;
  ModelParams params = tiny_params(3, ds.taxonomy->depth(), ds.num_companies(),
                                   ds.num_leaves(), tie);
  Rng rng(4);
  params.init(rng);

  auto replay_shifted = [&](double shift) {
    Dataset copy = ds;
    for (Event& ev : copy.events) ev.timestamp += shift;
    MemoryState mem(ds.num_companies(), ds.num_leaves(), ds.taxonomy->num_interior(), 3,
                    copy.start_time());
    auto items = split_events(copy.events);
    for (std::size_t b = 0; b < items.size(); b += 8) {
      std::size_t e = std::min(items.size(), b + 8);
      ad::Tape tape(false);
      replay_batch(tape, params, *ds.taxonomy, mem,
                   std::span<const EventItem>(items.data() + b, e - b));
    }
    return mem;
  };
  MemoryState base = replay_shifted(0.0);
  MemoryState moved = replay_shifted(1e7);
  CHECK(base.company_mem == moved.company_mem);
  CHECK(base.leaf_mem == moved.leaf_mem);
  CHECK(base.node_mem == moved.node_mem);
}
