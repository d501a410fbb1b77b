// Command-line front end: ingest | synth | train | eval | predict |
// dump-embeddings. Every run is a pure function of (config file, flags,
// seed, input files); flags override file keys.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "edgpat/checkpoint.hpp"
#include "edgpat/config.hpp"
#include "edgpat/evaluator.hpp"
#include "edgpat/synth.hpp"
#include "edgpat/trainer.hpp"

namespace {

using namespace edgpat;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value pairs from flags
};

Config effective_config(const CommonFlags& flags) {
  Config cfg;
  if (!flags.config_path.empty()) cfg = Config::from_file(flags.config_path);
  for (const auto& kv : flags.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

// Registers the flag-to-key plumbing shared by the data-bearing verbs.
void add_override_flag(CLI::App* cmd, CommonFlags& flags, const std::string& flag,
                       const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&flags, key](const std::string& v) { flags.overrides.push_back(key + "=" + v); },
      help);
}

Dataset load_dataset(const Config& cfg, bool apply_filter_default = true) {
  auto taxonomy = std::make_shared<const Taxonomy>(load_taxonomy(cfg.require_string("taxonomy")));
  Dataset ds = load_events(cfg.require_string("events"), taxonomy);
  ds.splits = make_splits(cfg.require_string("train_end"), cfg.require_string("val_end"),
                          cfg.require_string("test_end"));
  if (cfg.get_bool("filter", apply_filter_default)) {
    const double year_seconds = cfg.get_double("window_days", 365.0) * kSecondsPerDay;
    ds = filter_companies(ds, cfg.get_bool("filter_require_all", true), year_seconds);
  }
  return ds;
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.batch_size = static_cast<int>(cfg.get_long("batch_size", tc.batch_size));
  tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
  tc.max_epochs = static_cast<int>(cfg.get_long("max_epochs", tc.max_epochs));
  tc.patience = static_cast<int>(cfg.get_long("patience", tc.patience));
  tc.hidden_dim = static_cast<int>(cfg.get_long("hidden_dim", tc.hidden_dim));
  tc.time_dim = static_cast<int>(cfg.get_long("time_dim", 0));
  tc.dropout = cfg.get_double("dropout", tc.dropout);
  tc.window_seconds = cfg.get_double("window_days", 365.0) * kSecondsPerDay;
  tc.ablations = parse_ablations(cfg.get_string("ablate", ""));
  tc.persist_memory = cfg.get_bool("persist_memory", false);
  tc.negative_samples = static_cast<int>(cfg.get_long("negative_samples", 0));
  tc.seed = static_cast<std::uint64_t>(cfg.get_long("seed", 42));
  tc.val_recall_k = static_cast<int>(cfg.get_long("val_recall_k", 10));
  tc.eval_batch_size = static_cast<int>(cfg.get_long("eval_batch_size", tc.batch_size));
  const std::string agg = cfg.get_string("aggregation", "mean");
  if (agg == "mean")
    tc.aggregation = AggregationMode::kMean;
  else if (agg == "latest")
    tc.aggregation = AggregationMode::kLatest;
  else
    throw ConfigError("aggregation must be 'mean' or 'latest', got '" + agg + "'");
  return tc;
}

EvalOptions eval_options_from(const Config& cfg, const TrainConfig& tc) {
  EvalOptions opt;
  const std::string span = cfg.get_string("span", "test");
  if (span == "val" || span == "validation")
    opt.span = EvalSpan::kValidation;
  else if (span == "test")
    opt.span = EvalSpan::kTest;
  else
    throw ConfigError("span must be 'val' or 'test', got '" + span + "'");
  opt.warmup = cfg.get_bool("warmup", true);
  opt.level = static_cast<int>(cfg.get_long("level", 0));
  opt.ks = cfg.get_int_list("ks", {10, 20, 30, 40});
  opt.batch_size = tc.eval_batch_size;
  opt.aggregation = tc.aggregation;
  return opt;
}

json report_to_json(const MetricReport& report, const std::string& span) {
  json j;
  j["span"] = span;
  j["Ks"] = report.ks;
  json recall = json::object(), ndcg = json::object(), phr = json::object();
  for (int k : report.ks) {
    recall[std::to_string(k)] = report.recall.at(k);
    ndcg[std::to_string(k)] = report.ndcg.at(k);
    phr[std::to_string(k)] = report.phr.at(k);
  }
  j["recall"] = recall;
  j["ndcg"] = ndcg;
  j["phr"] = phr;
  j["N"] = report.companies_evaluated;
  return j;
}

int run_ingest(const CommonFlags& flags) {
  Config cfg = effective_config(flags);
  Dataset ds = load_dataset(cfg);
  const Splits& sp = ds.require_splits();
  long train = 0, val = 0, test = 0, later = 0;
  for (const Event& ev : ds.events) {
    if (ev.timestamp <= sp.train_end)
      ++train;
    else if (ev.timestamp <= sp.val_end)
      ++val;
    else if (ev.timestamp <= sp.test_end)
      ++test;
    else
      ++later;
  }
  json summary;
  summary["events"] = ds.events.size();
  summary["companies"] = ds.num_companies();
  summary["levels"] = ds.taxonomy->depth();
  json per_level = json::object();
  for (int level = 1; level <= ds.taxonomy->depth(); ++level)
    per_level["L" + std::to_string(level)] = ds.taxonomy->nodes_at_level(level).size();
  summary["codes_per_level"] = per_level;
  summary["span"] = {ds.events.empty() ? 0.0 : ds.events.front().timestamp,
                     ds.events.empty() ? 0.0 : ds.events.back().timestamp};
  summary["split_events"] = {{"train", train}, {"val", val}, {"test", test}, {"beyond", later}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_synth(const CommonFlags& flags, const std::string& out_dir) {
  Config cfg = effective_config(flags);
  SynthConfig sc;
  sc.companies = static_cast<int>(cfg.get_long("companies", sc.companies));
  {
    auto branching = cfg.get_int_list("branching", sc.branching);
    sc.branching = branching;
  }
  sc.start_year = static_cast<int>(cfg.get_long("start_year", sc.start_year));
  sc.years = static_cast<int>(cfg.get_long("years", sc.years));
  sc.events_per_company =
      static_cast<int>(cfg.get_long("events_per_company", sc.events_per_company));
  sc.total_events = cfg.get_long("total_events", sc.total_events);
  sc.concentration = cfg.get_double("concentration", sc.concentration);
  sc.subtrees_per_company =
      static_cast<int>(cfg.get_long("subtrees_per_company", sc.subtrees_per_company));
  sc.pref_level = static_cast<int>(cfg.get_long("pref_level", sc.pref_level));
  sc.drift_point = cfg.get_double("drift_point", sc.drift_point);
  sc.drift_width = cfg.get_double("drift_width", sc.drift_width);
  sc.coapply_prob = cfg.get_double("coapply_prob", sc.coapply_prob);
  sc.noise = cfg.get_double("noise", sc.noise);
  sc.max_codes_per_event =
      static_cast<int>(cfg.get_long("max_codes_per_event", sc.max_codes_per_event));
  sc.leaf_decay = cfg.get_double("leaf_decay", sc.leaf_decay);
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_long("seed", 42));

  SynthResult result = synthesize(sc, seed);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  write_events_jsonl(result.dataset, (dir / "events.jsonl").string());
  write_taxonomy_csv(*result.dataset.taxonomy, (dir / "taxonomy.csv").string());
  {
    std::ofstream truth(dir / "truth.json");
    truth << result.truth_json << "\n";
  }
  {
    const Splits& sp = *result.dataset.splits;
    std::ofstream conf(dir / "dataset.conf");
    conf << "events = " << (dir / "events.jsonl").string() << "\n"
         << "taxonomy = " << (dir / "taxonomy.csv").string() << "\n"
         << "train_end = " << std::to_string(static_cast<long>(sp.train_end)) << "\n"
         << "val_end = " << std::to_string(static_cast<long>(sp.val_end)) << "\n"
         << "test_end = " << std::to_string(static_cast<long>(sp.test_end)) << "\n";
  }
  std::cout << "wrote " << result.dataset.events.size() << " events, "
            << result.dataset.num_leaves() << " leaf codes to " << out_dir << "\n";
  return 0;
}

int run_train(const CommonFlags& flags, const std::string& out_path,
              const std::string& log_path) {
  Config cfg = effective_config(flags);
  Dataset ds = load_dataset(cfg);
  TrainConfig tc = train_config_from(cfg);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw DataError("cannot write training log '" + log_path + "'");
  }
  auto progress = [&log](const EpochLog& e) {
    json line = {{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"val_recall@10", e.val_metric},
                 {"wall_seconds", e.wall_seconds}};
    std::cerr << line.dump() << "\n";
    if (log.is_open()) log << line.dump() << "\n" << std::flush;
  };

  TrainState state = fit(ds, tc, progress);

  Checkpoint ck;
  ck.params = state.best_params;
  ck.memory = state.memory;
  ck.adam_step = state.adam_step;
  ck.config_hash = cfg.hash();
  ck.company_ids = ds.companies;
  for (int leaf = 0; leaf < ds.num_leaves(); ++leaf)
    ck.leaf_ids.push_back(ds.taxonomy->leaf_id(leaf));
  save_checkpoint(out_path, ck);

  json summary = {{"epochs_run", state.epochs_run},
                  {"best_epoch", state.best_epoch},
                  {"best_val_recall", state.best_val_metric},
                  {"checkpoint", out_path}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_eval(const CommonFlags& flags, const std::string& checkpoint_path,
             const std::string& baseline, const std::string& csv_path) {
  Config cfg = effective_config(flags);
  Dataset ds = load_dataset(cfg);
  TrainConfig tc = train_config_from(cfg);
  EvalOptions opt = eval_options_from(cfg, tc);

  MetricReport report;
  if (!baseline.empty()) {
    BaselineKind kind;
    if (baseline == "top")
      kind = BaselineKind::kTop;
    else if (baseline == "personaltop")
      kind = BaselineKind::kPersonalTop;
    else
      throw ConfigError("baseline must be 'top' or 'personaltop', got '" + baseline + "'");
    report = evaluate_baseline(kind, ds, opt);
  } else if (!checkpoint_path.empty()) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    std::vector<std::string> leaf_ids;
    for (int leaf = 0; leaf < ds.num_leaves(); ++leaf)
      leaf_ids.push_back(ds.taxonomy->leaf_id(leaf));
    check_compatible(ck, ds.companies, leaf_ids);
    report = evaluate_model(ck.params, ds, opt);
  } else {
    throw ConfigError("eval needs --checkpoint or --baseline");
  }

  const std::string span = opt.span == EvalSpan::kValidation ? "val" : "test";
  std::cout << report_to_json(report, span).dump(2) << "\n";
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw DataError("cannot write '" + csv_path + "'");
    csv << "metric,K,value\n";
    for (int k : report.ks) {
      csv << "recall," << k << ',' << report.recall.at(k) << "\n";
      csv << "ndcg," << k << ',' << report.ndcg.at(k) << "\n";
      csv << "phr," << k << ',' << report.phr.at(k) << "\n";
    }
  }
  return 0;
}

int run_predict(const CommonFlags& flags, const std::string& checkpoint_path,
                const std::vector<std::string>& company_ids, int k) {
  Config cfg = effective_config(flags);
  Dataset ds = load_dataset(cfg);
  Checkpoint ck = load_checkpoint(checkpoint_path);
  std::vector<std::string> leaf_ids;
  for (int leaf = 0; leaf < ds.num_leaves(); ++leaf)
    leaf_ids.push_back(ds.taxonomy->leaf_id(leaf));
  check_compatible(ck, ds.companies, leaf_ids);

  std::vector<int> companies;
  for (const auto& id : company_ids) {
    auto it = ds.company_index.find(id);
    if (it == ds.company_index.end()) throw DataError("unknown company id '" + id + "'");
    companies.push_back(it->second);
  }
  TrainConfig tc = train_config_from(cfg);
  auto preds = predict_current(ck.params, ds, companies, k, tc.eval_batch_size, tc.aggregation);

  json out = json::array();
  const Taxonomy& tax = *ds.taxonomy;
  for (const auto& pred : preds) {
    json entry;
    entry["company"] = ds.companies[pred.company];
    json codes = json::array();
    for (int leaf : pred.topk) {
      json row;
      row["code"] = tax.leaf_id(leaf);
      row["score"] = pred.scores(leaf);
      std::string path;
      for (int level = 1; level < tax.depth(); ++level) {
        path += tax.node(tax.ancestor_at_level(leaf, level)).id;
        path += " > ";
      }
      path += tax.leaf_id(leaf);
      row["path"] = path;
      codes.push_back(row);
    }
    entry["topk"] = codes;
    out.push_back(entry);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_dump_embeddings(const CommonFlags& flags, const std::string& checkpoint_path,
                        const std::string& out_path, bool trace) {
  Config cfg = effective_config(flags);
  Dataset ds = load_dataset(cfg);
  Checkpoint ck = load_checkpoint(checkpoint_path);
  std::vector<std::string> leaf_ids;
  for (int leaf = 0; leaf < ds.num_leaves(); ++leaf)
    leaf_ids.push_back(ds.taxonomy->leaf_id(leaf));
  check_compatible(ck, ds.companies, leaf_ids);

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  out.precision(17);
  auto emit = [&out](const char* type, const std::string& id, double t,
                     const Eigen::RowVectorXd& row) {
    out << type << '\t' << id << '\t' << t;
    for (Eigen::Index i = 0; i < row.size(); ++i) out << '\t' << row(i);
    out << '\n';
  };

  const Taxonomy& tax = *ds.taxonomy;
  ModelParams params = ck.params;
  MemoryState mem(ds.num_companies(), ds.num_leaves(), tax.num_interior(), params.dims().d,
                  ds.start_time());
  auto items = split_events(ds.events);
  // Trace mode walks item by item so every memory write gets its own row.
  const std::size_t step = trace ? 1 : 512;
  for (std::size_t begin = 0; begin < items.size(); begin += step) {
    const std::size_t end = std::min(items.size(), begin + step);
    ad::Tape tape(/*recording=*/false);
    BatchUpdates updates = replay_batch(tape, params, tax, mem,
                                        std::span<const EventItem>(items.data() + begin,
                                                                   end - begin));
    if (!trace) continue;
    for (const auto& [company, var] : updates.companies)
      emit("company", ds.companies[company], mem.last_seen_company(company),
           mem.company_mem.row(company));
    for (const auto& [leaf, var] : updates.leaves)
      emit("code", tax.leaf_id(leaf), mem.last_seen_leaf(leaf), mem.leaf_mem.row(leaf));
    for (const auto& [interior, var] : updates.nodes)
      emit("node", tax.node(tax.interior_node(interior)).id, mem.last_seen_node(interior),
           mem.node_mem.row(interior));
  }
  if (!trace) {
    for (int c = 0; c < ds.num_companies(); ++c)
      emit("company", ds.companies[c], mem.last_seen_company(c), mem.company_mem.row(c));
    for (int leaf = 0; leaf < ds.num_leaves(); ++leaf)
      emit("code", tax.leaf_id(leaf), mem.last_seen_leaf(leaf), mem.leaf_mem.row(leaf));
    for (int i = 0; i < tax.num_interior(); ++i)
      emit("node", tax.node(tax.interior_node(i)).id, mem.last_seen_node(i),
           mem.node_mem.row(i));
  }
  std::cout << "wrote embeddings to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-stream model of company patent-code activity"};
  app.require_subcommand(1);

  CommonFlags flags;
  struct {
    std::string out_dir = "synth_out";
    std::string train_out = "checkpoint.edgp";
    std::string train_log;
    std::string checkpoint;
    std::string baseline;
    std::string csv;
    std::vector<std::string> companies;
    int k = 10;
    std::string dump_out = "embeddings.tsv";
    bool trace = false;
  } args;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_path, "flat key = value config file");
    add_override_flag(cmd, flags, "--seed", "seed", "random seed");
    add_override_flag(cmd, flags, "--events", "events", "events JSONL path");
    add_override_flag(cmd, flags, "--taxonomy", "taxonomy", "taxonomy CSV path");
    add_override_flag(cmd, flags, "--train-end", "train_end", "training span end");
    add_override_flag(cmd, flags, "--val-end", "val_end", "validation span end");
    add_override_flag(cmd, flags, "--test-end", "test_end", "test span end");
    add_override_flag(cmd, flags, "--batch-size", "batch_size", "items per batch");
    add_override_flag(cmd, flags, "--hidden-dim", "hidden_dim", "model width");
    add_override_flag(cmd, flags, "--window-days", "window_days", "label window length");
    add_override_flag(cmd, flags, "--ablate", "ablate", "disable components: mi,sif,hmp,tie");
    add_override_flag(cmd, flags, "--ks", "ks", "comma-separated K list");
    add_override_flag(cmd, flags, "--level", "level", "evaluate at this taxonomy level");
    cmd->add_flag_function(
        "--no-warmup",
        [&flags](std::int64_t) { flags.overrides.push_back("warmup=false"); },
        "skip the validation-span replay before test scoring");
    cmd->add_flag_function(
        "--persist-memory-across-epochs",
        [&flags](std::int64_t) { flags.overrides.push_back("persist_memory=true"); },
        "carry training memories across epochs instead of re-initializing");
    cmd->add_flag_function(
        "--no-filter", [&flags](std::int64_t) { flags.overrides.push_back("filter=false"); },
        "skip the activity-based company filter");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "validate and summarize a dataset");
  add_common(ingest);

  CLI::App* synth = app.add_subcommand("synth", "generate a planted-preference corpus");
  add_common(synth);
  synth->add_option("--out", args.out_dir, "output directory");
  add_override_flag(synth, flags, "--companies", "companies", "number of companies");
  add_override_flag(synth, flags, "--branching", "branching", "taxonomy branching, e.g. 2,5,5");
  add_override_flag(synth, flags, "--years", "years", "number of years");
  add_override_flag(synth, flags, "--events-per-company", "events_per_company", "event budget");
  add_override_flag(synth, flags, "--total-events", "total_events", "exact total event count");
  add_override_flag(synth, flags, "--concentration", "concentration", "preference sharpness");

  CLI::App* train = app.add_subcommand("train", "train and checkpoint the best model");
  add_common(train);
  train->add_option("--out", args.train_out, "checkpoint path");
  train->add_option("--log", args.train_log, "per-epoch JSONL log path");
  add_override_flag(train, flags, "--learning-rate", "learning_rate", "step size");
  add_override_flag(train, flags, "--max-epochs", "max_epochs", "epoch cap");
  add_override_flag(train, flags, "--patience", "patience", "early-stop patience");
  add_override_flag(train, flags, "--dropout", "dropout", "head dropout rate");
  add_override_flag(train, flags, "--negative-samples", "negative_samples",
                    "negatives per positive (0 = all codes)");

  CLI::App* eval = app.add_subcommand("eval", "report Recall/NDCG/PHR on a span");
  add_common(eval);
  eval->add_option("--checkpoint", args.checkpoint, "trained checkpoint");
  eval->add_option("--baseline", args.baseline, "'top' or 'personaltop'");
  eval->add_option("--csv", args.csv, "also write metric rows as CSV");
  add_override_flag(eval, flags, "--span", "span", "'val' or 'test'");

  CLI::App* predict = app.add_subcommand("predict", "top-K codes for given companies");
  add_common(predict);
  predict->add_option("--checkpoint", args.checkpoint, "trained checkpoint")->required();
  predict->add_option("--company", args.companies, "company id (repeatable)")->required();
  predict->add_option("--k", args.k, "list length");

  CLI::App* dump = app.add_subcommand("dump-embeddings", "export memories as TSV");
  add_common(dump);
  dump->add_option("--checkpoint", args.checkpoint, "trained checkpoint")->required();
  dump->add_option("--out", args.dump_out, "output TSV path");
  dump->add_flag("--trace", args.trace, "one row per memory update instead of final state");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return run_ingest(flags);
    if (synth->parsed()) return run_synth(flags, args.out_dir);
    if (train->parsed()) return run_train(flags, args.train_out, args.train_log);
    if (eval->parsed()) return run_eval(flags, args.checkpoint, args.baseline, args.csv);
    if (predict->parsed()) return run_predict(flags, args.checkpoint, args.companies, args.k);
    if (dump->parsed())
      return run_dump_embeddings(flags, args.checkpoint, args.dump_out, args.trace);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
