#include "edgpat/memory.hpp"

#include <algorithm>
#include <vector>

#include "edgpat/time_encoding.hpp"

namespace edgpat {

ad::Var integrate_codes(ad::Tape& tape, const MemoryState& mem, std::span<const int> codes) {
  if (codes.empty()) throw NumericError("integrate_codes: empty code set");
  std::vector<ad::Var> rows;
  rows.reserve(codes.size());
  for (int leaf : codes) rows.push_back(tape.constant(mem.leaf_mem.row(leaf).transpose()));
  return tape.mean(rows);
}

ad::Var encode_gap(ad::Tape& tape, ModelParams& params, double event_time, double last_seen) {
  if (params.ablations().tie) return tape.zeros(params.dims().d_time);
  return tape.time_encode(seconds_to_days(event_time - last_seen), params.time_w, params.time_b);
}

Message encode_company_message(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                               const EventItem& item) {
  const int d = params.dims().d;
  ad::Var codes_info = params.ablations().mi
                           ? tape.zeros(d)
                           : integrate_codes(tape, mem, item.codes);
  ad::Var own = tape.constant(mem.company_mem.row(item.company).transpose());
  ad::Var gap = encode_gap(tape, params, item.timestamp, mem.last_seen_company(item.company));
  std::vector<ad::Var> parts{codes_info, own, gap};
  ad::Var payload = params.msg_company.apply(tape, tape.concat(parts));
  return Message{item.company, payload, item.timestamp};
}

Message encode_leaf_message(ad::Tape& tape, ModelParams& params, const MemoryState& mem,
                            const EventItem& item, int leaf, ad::Var parent_mem) {
  const int d = params.dims().d;
  ad::Var company = params.ablations().mi
                        ? tape.zeros(d)
                        : tape.constant(mem.company_mem.row(item.company).transpose());
  ad::Var own = tape.constant(mem.leaf_mem.row(leaf).transpose());
  ad::Var gap = encode_gap(tape, params, item.timestamp, mem.last_seen_leaf(leaf));
  std::vector<ad::Var> parts{company, own, gap};
  if (!params.ablations().hmp) {
    if (!parent_mem.valid()) throw NumericError("encode_leaf_message: missing parent memory");
    parts.push_back(parent_mem);
  }
  ad::Var payload = params.msg_leaf.apply(tape, tape.concat(parts));
  return Message{leaf, payload, item.timestamp};
}

Message aggregate_messages(ad::Tape& tape, std::span<const Message> msgs, AggregationMode mode) {
  if (msgs.empty()) throw NumericError("aggregate_messages: empty message list");
  Message out;
  out.target = msgs.front().target;
  out.event_time = msgs.front().event_time;
  for (const Message& m : msgs) {
    if (m.target != out.target) throw NumericError("aggregate_messages: mixed targets");
    out.event_time = std::max(out.event_time, m.event_time);
  }
  if (msgs.size() == 1) {
    out.payload = msgs.front().payload;
    return out;
  }
  if (mode == AggregationMode::kLatest) {
    // Last message at the maximal event time, in encounter order.
    const Message* best = &msgs.front();
    for (const Message& m : msgs)
      if (m.event_time >= best->event_time) best = &m;
    out.payload = best->payload;
    return out;
  }
  std::vector<ad::Var> payloads;
  payloads.reserve(msgs.size());
  for (const Message& m : msgs) payloads.push_back(m.payload);
  out.payload = tape.mean(payloads);
  return out;
}

namespace {

ad::Var apply_update(ad::Tape& tape, GruCell& cell, const Message& msg, Mat& rows, Vec& last_seen) {
  ad::Var state = tape.constant(rows.row(msg.target).transpose());
  ad::Var next = cell.step(tape, msg.payload, state);
  rows.row(msg.target) = tape.value(next).transpose();
  last_seen(msg.target) = msg.event_time;
  return next;
}

}  // namespace

ad::Var update_company(ad::Tape& tape, ModelParams& params, MemoryState& mem, const Message& msg) {
  return apply_update(tape, params.gru_company, msg, mem.company_mem, mem.last_seen_company);
}

ad::Var update_leaf(ad::Tape& tape, ModelParams& params, MemoryState& mem, const Message& msg) {
  return apply_update(tape, params.gru_leaf, msg, mem.leaf_mem, mem.last_seen_leaf);
}

}  // namespace edgpat
