#include "edgpat/synth.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "edgpat/rng.hpp"

namespace edgpat {

void SynthConfig::validate() const {
  if (companies < 1) throw ConfigError("synth: companies must be >= 1");
  if (branching.empty()) throw ConfigError("synth: branching must be nonempty");
  for (int b : branching)
    if (b < 1) throw ConfigError("synth: branching factors must be >= 1");
  if (years < 3) throw ConfigError("synth: need >= 3 years (train/validation/test)");
  if (events_per_company < 1 && total_events < 1)
    throw ConfigError("synth: need a positive event budget");
  if (pref_level < 1 || pref_level > static_cast<int>(branching.size()))
    throw ConfigError("synth: pref_level outside the taxonomy depth");
  if (subtrees_per_company < 1) throw ConfigError("synth: subtrees_per_company must be >= 1");
  if (!(concentration >= 0)) throw ConfigError("synth: concentration must be >= 0");
  if (max_codes_per_event < 1) throw ConfigError("synth: max_codes_per_event must be >= 1");
  if (!(leaf_decay > 0) || leaf_decay > 1)
    throw ConfigError("synth: leaf_decay must be in (0, 1]");
}

namespace {

std::string padded(const char* prefix, long index, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*ld", prefix, width, index);
  return buf;
}

std::string level_node_id(int level, long index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "n%d_%06ld", level, index);
  return buf;
}

double year_start_seconds(int year) {
  using namespace std::chrono;
  return static_cast<double>(
      duration_cast<seconds>(sys_days{std::chrono::year{year} / 1 / 1}.time_since_epoch())
          .count());
}

}  // namespace

Taxonomy make_taxonomy_with_counts(const std::vector<long>& counts_per_level) {
  if (counts_per_level.empty()) throw ConfigError("taxonomy counts: no levels");
  for (long c : counts_per_level)
    if (c < 1) throw ConfigError("taxonomy counts: every level needs >= 1 node");
  for (std::size_t l = 1; l < counts_per_level.size(); ++l)
    if (counts_per_level[l] < counts_per_level[l - 1])
      throw ConfigError("taxonomy counts: levels must not shrink");

  std::vector<std::tuple<std::string, std::string, int>> entries;
  for (std::size_t l = 0; l < counts_per_level.size(); ++l) {
    const long count = counts_per_level[l];
    const long parents = l == 0 ? 0 : counts_per_level[l - 1];
    for (long i = 0; i < count; ++i) {
      std::string parent_id;
      if (l > 0) {
        // Even split: child i belongs to parent floor(i * parents / count).
        parent_id = level_node_id(static_cast<int>(l), i * parents / count);
      }
      entries.emplace_back(level_node_id(static_cast<int>(l) + 1, i), parent_id,
                           static_cast<int>(l) + 1);
    }
  }
  return Taxonomy::build(entries);
}

Taxonomy make_taxonomy(const std::vector<int>& branching) {
  std::vector<long> counts;
  long running = 1;
  for (int b : branching) {
    if (b < 1) throw ConfigError("taxonomy branching factors must be >= 1");
    running *= b;
    counts.push_back(running);
  }
  return make_taxonomy_with_counts(counts);
}

namespace {

struct Preference {
  std::vector<int> subtrees;   // positions within the preference level
  std::vector<double> weights; // normalized, aligned with subtrees
};

Preference draw_preference(Rng& rng, int num_subtrees, int support) {
  Preference pref;
  support = std::min(support, num_subtrees);
  std::vector<int> pool(num_subtrees);
  for (int i = 0; i < num_subtrees; ++i) pool[i] = i;
  for (int i = 0; i < support; ++i) {
    int pick = i + rng.index(num_subtrees - i);
    std::swap(pool[i], pool[pick]);
    pref.subtrees.push_back(pool[i]);
  }
  double total = 0;
  for (int i = 0; i < support; ++i) {
    double w = std::pow(0.5, i) * rng.uniform(0.8, 1.2);
    pref.weights.push_back(w);
    total += w;
  }
  for (double& w : pref.weights) w /= total;
  return pref;
}

// Power-sharpened categorical draw in log space, stable for any
// concentration (including effectively infinite).
int sample_sharpened(Rng& rng, const std::vector<double>& weights, double concentration) {
  std::vector<double> logits(weights.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    logits[i] = concentration * std::log(std::max(weights[i], 1e-300));
    max_logit = std::max(max_logit, logits[i]);
  }
  double total = 0;
  for (double& l : logits) {
    l = std::exp(l - max_logit);
    total += l;
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    u -= logits[i];
    if (u <= 0) return static_cast<int>(i);
  }
  return static_cast<int>(logits.size()) - 1;
}

}  // namespace

SynthResult synthesize(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  auto taxonomy = std::make_shared<const Taxonomy>(make_taxonomy(config.branching));
  const int num_leaves = taxonomy->num_leaves();

  // Leaves grouped by their ancestor at the preference level.
  const auto& subtree_nodes = taxonomy->nodes_at_level(config.pref_level);
  const int num_subtrees = static_cast<int>(subtree_nodes.size());
  std::vector<std::vector<int>> subtree_leaves(num_subtrees);
  for (int leaf = 0; leaf < num_leaves; ++leaf) {
    int pos = taxonomy->level_position(taxonomy->ancestor_at_level(leaf, config.pref_level));
    subtree_leaves[pos].push_back(leaf);
  }

  Rng root(seed);
  nlohmann::json truth;
  truth["drift_point"] = config.drift_point;
  truth["drift_width"] = config.drift_width;
  truth["companies"] = nlohmann::json::object();

  // Per-company event budget.
  std::vector<long> budget(config.companies,
                           config.total_events > 0 ? 0 : config.events_per_company);
  if (config.total_events > 0)
    for (long i = 0; i < config.total_events; ++i) ++budget[i % config.companies];

  const double span_begin = year_start_seconds(config.start_year);
  const double span_end = year_start_seconds(config.start_year + config.years);

  std::vector<RawEvent> records;
  long patent_counter = 0;
  for (int c = 0; c < config.companies; ++c) {
    Rng rng = root.fork(0xc0ffee).fork(static_cast<std::uint64_t>(c));
    Preference early = draw_preference(rng, num_subtrees, config.subtrees_per_company);
    Preference late = draw_preference(rng, num_subtrees, config.subtrees_per_company);

    // Per-company leaf order within every favourite subtree; geometric
    // weights over this order concentrate the company on a few leaves.
    std::map<int, std::vector<int>> leaf_order;
    {
      std::set<int> favourites(early.subtrees.begin(), early.subtrees.end());
      favourites.insert(late.subtrees.begin(), late.subtrees.end());
      for (int subtree : favourites) {
        std::vector<int> perm = subtree_leaves[subtree];
        for (std::size_t i = perm.size(); i > 1; --i)
          std::swap(perm[i - 1], perm[rng.index(static_cast<int>(i))]);
        leaf_order.emplace(subtree, std::move(perm));
      }
    }
    auto sample_leaf_in = [&](int subtree, Rng& r) {
      const std::vector<int>& order = leaf_order.at(subtree);
      std::vector<double> weights(order.size());
      double w = 1.0, total = 0.0;
      for (std::size_t i = 0; i < order.size(); ++i) {
        weights[i] = w;
        total += w;
        w *= config.leaf_decay;
      }
      double u = r.uniform() * total;
      for (std::size_t i = 0; i < order.size(); ++i) {
        u -= weights[i];
        if (u <= 0) return order[i];
      }
      return order.back();
    };

    const std::string company_id = padded("u", c, 4);
    nlohmann::json entry;
    entry["early"] = {{"subtrees", early.subtrees}, {"weights", early.weights}};
    entry["late"] = {{"subtrees", late.subtrees}, {"weights", late.weights}};
    truth["companies"][company_id] = entry;

    // Event times: the yearly quota keeps every company active in every
    // year, so the split-based filtering keeps the full roster.
    std::vector<double> times;
    const long count = budget[c];
    for (int y = 0; y < config.years; ++y) {
      long quota = count / config.years + (y < count % config.years ? 1 : 0);
      const double y0 = year_start_seconds(config.start_year + y);
      const double y1 = year_start_seconds(config.start_year + y + 1);
      for (long e = 0; e < quota; ++e) times.push_back(rng.uniform(y0, y1 - 1.0));
    }

    for (double t : times) {
      const double f = (t - span_begin) / (span_end - span_begin);
      const double ramp = std::clamp(
          (f - (config.drift_point - config.drift_width / 2)) / config.drift_width, 0.0, 1.0);

      // Blend the two phases over the union of their supports.
      std::vector<int> support;
      std::vector<double> weights;
      auto add = [&](const Preference& p, double scale) {
        for (std::size_t i = 0; i < p.subtrees.size(); ++i) {
          auto it = std::find(support.begin(), support.end(), p.subtrees[i]);
          if (it == support.end()) {
            support.push_back(p.subtrees[i]);
            weights.push_back(scale * p.weights[i]);
          } else {
            weights[it - support.begin()] += scale * p.weights[i];
          }
        }
      };
      add(early, 1.0 - ramp);
      add(late, ramp);

      RawEvent rec;
      rec.patent_id = padded("p", patent_counter++, 7);
      rec.timestamp = t;
      rec.companies.push_back(company_id);
      if (config.companies > 1 && rng.bernoulli(config.coapply_prob)) {
        int partner = rng.index(config.companies - 1);
        if (partner >= c) ++partner;
        rec.companies.push_back(padded("u", partner, 4));
      }

      int code_count = 1;
      while (code_count < config.max_codes_per_event && rng.bernoulli(0.35)) ++code_count;
      for (int k = 0; k < code_count; ++k) {
        int leaf;
        if (rng.bernoulli(config.noise)) {
          leaf = rng.index(num_leaves);
        } else {
          int subtree = support[sample_sharpened(rng, weights, config.concentration)];
          leaf = sample_leaf_in(subtree, rng);
        }
        rec.codes.push_back(taxonomy->leaf_id(leaf));
      }
      records.push_back(std::move(rec));
    }
  }

  SynthResult result;
  result.dataset = build_dataset(std::move(records), taxonomy);
  result.dataset.splits = Splits{year_start_seconds(config.start_year + config.years - 2),
                                 year_start_seconds(config.start_year + config.years - 1),
                                 span_end};
  result.truth_json = truth.dump(2);
  return result;
}

void write_events_jsonl(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const Event& ev : dataset.events) {
    nlohmann::json j;
    j["patent_id"] = ev.patent_id;
    std::vector<std::string> companies, codes;
    for (int c : ev.companies) companies.push_back(dataset.companies[c]);
    for (int leaf : ev.codes) codes.push_back(dataset.taxonomy->leaf_id(leaf));
    j["companies"] = companies;
    j["codes"] = codes;
    j["timestamp"] = ev.timestamp;
    out << j.dump() << '\n';
  }
}

void write_taxonomy_csv(const Taxonomy& taxonomy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "node_id,parent_id,level\n";
  for (int level = 1; level <= taxonomy.depth(); ++level)
    for (int node_idx : taxonomy.nodes_at_level(level)) {
      const auto& node = taxonomy.node(node_idx);
      const std::string parent = node.parent < 0 ? "" : taxonomy.node(node.parent).id;
      out << node.id << ',' << parent << ',' << node.level << '\n';
    }
}

}  // namespace edgpat
