#include "edgpat/model.hpp"

#include <sstream>

#include "edgpat/time_encoding.hpp"

namespace edgpat {

int ModelParams::leaf_msg_arity() const {
  return 2 * dims_.d + dims_.d_time + (ablations_.hmp ? 0 : dims_.d);
}

int ModelParams::node_msg_arity(int level) const {
  const int adjacent = (level == 1) ? dims_.d : 2 * dims_.d;
  return adjacent + dims_.d + dims_.d_time;
}

ModelParams::ModelParams(const ModelDims& dims, const Ablations& ablations)
    : dims_(dims), ablations_(ablations) {
  if (dims.d_time % 2 != 0) throw ConfigError("model: d_time must be even");
  const int d = dims.d;

  time_w = ad::Tensor("time.w", dims.d_time / 2, 1);
  time_b = ad::Tensor("time.b", dims.d_time / 2, 1);

  msg_company = Mlp("msg_company", 2 * d + dims.d_time, d, d);
  msg_leaf = Mlp("msg_leaf", leaf_msg_arity(), d, d);
  for (int level = 1; level < dims.levels; ++level)
    msg_node.emplace_back("msg_node_l" + std::to_string(level), node_msg_arity(level), d, d);

  gru_company = GruCell("gru_company", d, d);
  gru_leaf = GruCell("gru_leaf", d, d);
  for (int level = 1; level < dims.levels; ++level)
    gru_node.emplace_back("gru_node_l" + std::to_string(level), d, d);

  static_company = ad::Tensor("static_company", dims.companies, d);
  static_leaf = ad::Tensor("static_leaf", dims.leaves, d);
  gate_company = ad::Tensor("gate_company", dims.companies, 1);
  gate_leaf = ad::Tensor("gate_leaf", dims.leaves, 1);
  level_weights = ad::Tensor("level_weights", dims.levels, 1);
  history_head = Mlp("history_head", d, d, d);
  company_head = Mlp("company_head", d, d, d);
  output_head = Mlp("output_head", d, d, 1);
}

void ModelParams::init(Rng& rng) {
  init_time_encoder(time_w, time_b);
  Rng r = rng.fork(0x6d6f64656c);
  msg_company.init(r);
  msg_leaf.init(r);
  for (auto& mlp : msg_node) mlp.init(r);
  gru_company.init(r);
  gru_leaf.init(r);
  for (auto& cell : gru_node) cell.init(r);
  xavier_init(static_company, r);
  xavier_init(static_leaf, r);
  gate_company.value.setZero();  // sigmoid(0) = 0.5, balanced mix
  gate_leaf.value.setZero();
  level_weights.value.setOnes();
  history_head.init(r);
  company_head.init(r);
  output_head.init(r);
}

void ModelParams::visit(const std::function<void(ad::Tensor&)>& fn) {
  fn(time_w);
  fn(time_b);
  msg_company.visit(fn);
  msg_leaf.visit(fn);
  for (auto& mlp : msg_node) mlp.visit(fn);
  gru_company.visit(fn);
  gru_leaf.visit(fn);
  for (auto& cell : gru_node) cell.visit(fn);
  fn(static_company);
  fn(static_leaf);
  fn(gate_company);
  fn(gate_leaf);
  fn(level_weights);
  history_head.visit(fn);
  company_head.visit(fn);
  output_head.visit(fn);
}

void ModelParams::visit(const std::function<void(const ad::Tensor&)>& fn) const {
  const_cast<ModelParams*>(this)->visit(
      [&fn](ad::Tensor& t) { fn(static_cast<const ad::Tensor&>(t)); });
}

void ModelParams::zero_grads() {
  visit([](ad::Tensor& t) { t.zero_grad(); });
}

ad::Tensor* ModelParams::find(const std::string& name) {
  ad::Tensor* found = nullptr;
  visit([&](ad::Tensor& t) {
    if (t.name == name) found = &t;
  });
  return found;
}

Ablations parse_ablations(const std::string& csv) {
  Ablations a;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "mi")
      a.mi = true;
    else if (tok == "sif")
      a.sif = true;
    else if (tok == "hmp")
      a.hmp = true;
    else if (tok == "tie")
      a.tie = true;
    else
      throw ConfigError("unknown ablation '" + tok + "' (want mi, sif, hmp, tie)");
  }
  return a;
}

std::string ablations_to_string(const Ablations& a) {
  std::string out;
  auto append = [&out](const char* name) {
    if (!out.empty()) out += ',';
    out += name;
  };
  if (a.mi) append("mi");
  if (a.sif) append("sif");
  if (a.hmp) append("hmp");
  if (a.tie) append("tie");
  return out;
}

}  // namespace edgpat
