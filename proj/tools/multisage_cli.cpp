// multisage command-line tool: inspect, train, sweep, score, split-export,
// split-import.

#include "multisage/checkpoint.hpp"
#include "multisage/config.hpp"
#include "multisage/errors.hpp"
#include "multisage/eval.hpp"
#include "multisage/experiments.hpp"
#include "multisage/ingest.hpp"
#include "multisage/log.hpp"
#include "multisage/rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace multisage;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumeric = 4, kMismatch = 5 };

// Options shared by every subcommand that needs a graph or a run config.
struct Common {
  std::string config_file;
  std::string dataset;
  std::string edges;
  std::string couplings;
  std::string policy;
  std::string data_dir;
  std::string log_level;
  std::optional<std::uint64_t> seed;

  void add_graph(CLI::App* app) {
    app->add_option("--config", config_file, "JSON run config");
    app->add_option("--dataset", dataset, "dataset name from the config (default: first)");
    app->add_option("--edges", edges, "edge list (overrides the config datasets)");
    app->add_option("--couplings", couplings, "explicit coupling file");
    app->add_option("--policy", policy, "coupling policy: derive_shared_label | explicit");
    app->add_option("--data-dir", data_dir, "base directory for relative dataset paths");
    app->add_option("--log-level", log_level, "debug | info | warn | error | off");
  }
  void add_seed(CLI::App* app) { app->add_option("--seed", seed, "master seed"); }
};

json load_doc(const std::string& file) {
  if (file.empty()) return json{{"schema_version", kConfigSchemaVersion}};
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file + ": " + e.what());
  }
}

// Flag overrides are written into the document before validation so they go
// through the same schema checks as file values.
void apply_common(json& doc, const Common& c) {
  if (!c.edges.empty()) {
    json d = {{"edges", c.edges}};
    if (!c.couplings.empty()) d["couplings"] = c.couplings;
    if (!c.policy.empty()) {
      d["coupling_policy"] = c.policy;
    } else if (!c.couplings.empty()) {
      d["coupling_policy"] = "explicit";
    }
    doc["datasets"] = json::array({d});
  } else if (!c.couplings.empty() || !c.policy.empty()) {
    throw ConfigError("--couplings and --policy need --edges");
  }
  if (!c.data_dir.empty()) doc["data_dir"] = c.data_dir;
  if (!c.log_level.empty()) doc["log_level"] = c.log_level;
  if (c.seed) doc["seed"] = *c.seed;
}

RunConfig finish(json& doc) {
  auto config = parse_run_config(doc);
  log::set_level(config.log_level);
  return config;
}

const DatasetSpec& pick_dataset(const RunConfig& config, const std::string& name) {
  if (config.datasets.empty()) throw ConfigError("no dataset given (use --edges or a config with datasets)");
  if (name.empty()) return config.datasets.front();
  for (const auto& d : config.datasets)
    if (d.name == name) return d;
  throw ConfigError("dataset '" + name + "' not found in config");
}

MultiplexGraph load_dataset(const RunConfig& config, const DatasetSpec& d, LoadReport* report = nullptr) {
  std::optional<fs::path> couplings;
  if (d.couplings) couplings = resolve_data_path(config, *d.couplings);
  return load_multiplex(resolve_data_path(config, d.edges), couplings, d.coupling_policy, report);
}

json provenance(const RunConfig& config) {
  const auto resolved = to_json(config);
  return {{"tool", "multisage"}, {"config_hash", config_hash(resolved)}, {"master_seed", config.seed},
          {"config", resolved}};
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json auc_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------

struct InspectOpts {
  Common common;
  std::string expect;
};

int cmd_inspect(InspectOpts& o) {
  json doc = load_doc(o.common.config_file);
  apply_common(doc, o.common);
  const auto config = finish(doc);
  std::vector<const DatasetSpec*> targets;
  if (o.common.dataset.empty()) {
    for (const auto& d : config.datasets) targets.push_back(&d);
  } else {
    targets.push_back(&pick_dataset(config, o.common.dataset));
  }
  if (targets.empty()) throw ConfigError("no dataset given (use --edges or a config with datasets)");
  if (!o.expect.empty() && targets.size() != 1) throw ConfigError("--expect needs exactly one dataset");

  int status = kOk;
  for (const auto* d : targets) {
    LoadReport report;
    const auto g = load_dataset(config, *d, &report);
    std::set<std::string> entities;
    for (const auto& r : g.replicas()) entities.insert(r.label);
    std::cout << "dataset " << d->name << '\n';
    std::cout << g.num_replicas() << " nodes, " << g.num_layers() << " layers, " << g.num_intra_edges() << " intra, "
              << g.num_inter_edges() << " inter\n";
    std::cout << "distinct labels " << entities.size() << '\n';
    std::cout << "lines " << report.lines << ", self-loops dropped " << report.self_loops_dropped
              << ", duplicates dropped " << report.duplicates_dropped << ", replicas before lcc "
              << report.replicas_before_lcc << '\n';
    for (LayerId l = 0; l < g.num_layers(); ++l) {
      std::size_t m = 0;
      for (ReplicaId n = g.layer_begin(l); n < g.layer_end(l); ++n) m += g.intra_neighbors(n).size();
      std::cout << "  layer " << g.layer_name(l) << ": " << g.layer_size(l) << " replicas, " << m / 2
                << " intra edges\n";
    }
    if (!o.expect.empty()) {
      std::vector<std::size_t> want;
      std::stringstream ss(o.expect);
      for (std::string tok; std::getline(ss, tok, ',');) want.push_back(std::stoull(tok));
      if (want.size() != 4) throw ConfigError("--expect takes nodes,layers,intra,inter");
      const std::size_t got[4] = {g.num_replicas(), g.num_layers(), g.num_intra_edges(), g.num_inter_edges()};
      const char* names[4] = {"nodes", "layers", "intra", "inter"};
      for (int i = 0; i < 4; ++i) {
        if (got[i] != want[i]) {
          std::cout << "MISMATCH " << names[i] << ": expected " << want[i] << ", got " << got[i] << '\n';
          status = kMismatch;
        }
      }
      if (status == kOk) std::cout << "match\n";
    }
  }
  return status;
}

// ---------------------------------------------------------------------------

struct RunOverrides {
  std::string mode;
  std::vector<std::string> modes;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::vector<std::size_t> hidden_dims;
  std::string activation;
  std::string output_activation;
  std::optional<std::size_t> q;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> threads;
  std::vector<double> grid;
  std::optional<std::size_t> ws_nodes;
  std::optional<std::size_t> ws_k;
  std::string kind;
  std::string out;
  std::string format;

  void add_model(CLI::App* app) {
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--lr", learning_rate, "learning rate");
    app->add_option("--batch-size", batch_size, "positive edges per step (0 = full batch)");
    app->add_option("--hidden-dims", hidden_dims, "d_1 .. d_K")->delimiter(',');
    app->add_option("--activation", activation, "hidden activation: relu | sigmoid | identity");
    app->add_option("--output-activation", output_activation, "activation of the last depth");
    app->add_option("--q", q, "negatives per positive edge");
    app->add_option("--out", out, "output directory");
  }

  void apply(json& doc) const {
    if (!mode.empty()) doc["model"]["mode"] = mode;
    if (!modes.empty()) doc["sweep"]["modes"] = modes;
    if (epochs) doc["train"]["epochs"] = *epochs;
    if (learning_rate) doc["train"]["learning_rate"] = *learning_rate;
    if (batch_size) doc["train"]["batch_size"] = *batch_size;
    if (!hidden_dims.empty()) doc["model"]["hidden_dims"] = hidden_dims;
    if (!activation.empty()) doc["model"]["activation"] = activation;
    if (!output_activation.empty()) doc["model"]["output_activation"] = output_activation;
    if (q) doc["negatives"]["q"] = *q;
    if (runs) doc["sweep"]["runs"] = *runs;
    if (threads) doc["sweep"]["threads"] = *threads;
    if (!grid.empty()) doc["sweep"]["grid"] = grid;
    if (ws_nodes) doc["sweep"]["ws_nodes"] = *ws_nodes;
    if (ws_k) doc["sweep"]["ws_k"] = *ws_k;
    if (!kind.empty()) doc["sweep"]["kind"] = kind;
    if (!out.empty()) doc["output"]["dir"] = out;
    if (!format.empty()) doc["output"]["format"] = format;
  }
};

struct TrainOpts {
  Common common;
  RunOverrides run;
  std::string split_file;
  bool write_embeddings = false;
};

int cmd_train(TrainOpts& o) {
  json doc = load_doc(o.common.config_file);
  apply_common(doc, o.common);
  o.run.apply(doc);
  const auto config = finish(doc);
  const auto& ds = pick_dataset(config, o.common.dataset);
  const auto g = load_dataset(config, ds);

  const auto seed = run_seed(config.seed, 0);
  const auto split = o.split_file.empty() ? make_split(g, config.protocol().split, split_seed(seed))
                                          : load_split(o.split_file, g);
  log::info("training " + std::string(to_string(config.mode)) + " on " + ds.name);
  const auto run = train_and_evaluate(g, split, config.mode, config.protocol(), seed);

  const fs::path out = config.output_dir;
  fs::create_directories(out);
  const auto prov = provenance(config);
  const auto prov_line = prov.dump();

  save_checkpoint(out / "checkpoint.txt",
                  Checkpoint{run.trained.params, config.protocol().train.l2_normalize_output, prov_line});
  save_split(out / "split.txt", split, prov_line);
  {
    std::ofstream loss(out / "loss.csv");
    loss << "# provenance " << prov_line << "\nepoch,loss\n";
    for (std::size_t e = 0; e < run.trained.loss_history.size(); ++e)
      loss << e + 1 << ',' << fmt(run.trained.loss_history[e]) << '\n';
    if (!loss) throw DataError("cannot write " + (out / "loss.csv").string());
  }
  if (o.write_embeddings) {
    std::ofstream emb(out / "embeddings.tsv");
    emb << "# provenance " << prov_line << '\n';
    const auto& z = run.trained.embeddings;
    for (ReplicaId n = 0; n < g.num_replicas(); ++n) {
      emb << g.layer_name(g.layer_of(n)) << '\t' << g.replica(n).label;
      const auto v = z.vector(n);
      for (Eigen::Index i = 0; i < v.size(); ++i) emb << '\t' << fmt(v[i]);
      emb << '\n';
    }
    if (!emb) throw DataError("cannot write " + (out / "embeddings.tsv").string());
  }
  json metrics = {{"provenance", prov},
                  {"dataset", ds.name},
                  {"mode", to_string(config.mode)},
                  {"run_seed", seed},
                  {"split_seed", split.seed},
                  {"replicas", g.num_replicas()},
                  {"layers", g.num_layers()},
                  {"train_positives", split.train_pos_intra.size() + split.train_pos_inter.size()},
                  {"test_positives_intra", split.test_pos_intra.size()},
                  {"test_positives_inter", split.test_pos_inter.size()},
                  {"test_negatives_intra", split.test_neg_intra.size()},
                  {"test_negatives_inter", split.test_neg_inter.size()},
                  {"auc_intra", auc_json(run.eval.auc_intra())},
                  {"auc_inter", auc_json(run.eval.auc_inter())},
                  {"final_loss", run.trained.loss_history.back()},
                  {"epochs", run.trained.loss_history.size()},
                  {"runtime_s", run.runtime_s}};
  std::ofstream m(out / "metrics.json");
  m << metrics.dump(2) << '\n';
  if (!m) throw DataError("cannot write " + (out / "metrics.json").string());

  std::cout << "auc_intra " << (run.eval.auc_intra() ? fmt(*run.eval.auc_intra()) : "n/a") << '\n';
  std::cout << "auc_inter " << (run.eval.auc_inter() ? fmt(*run.eval.auc_inter()) : "n/a") << '\n';
  std::cout << "wrote " << out.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct SweepOpts {
  Common common;
  RunOverrides run;
};

int cmd_sweep(SweepOpts& o) {
  json doc = load_doc(o.common.config_file);
  apply_common(doc, o.common);
  o.run.apply(doc);
  const auto config = finish(doc);
  const auto& spec = config.sweep;
  const fs::path out = config.output_dir;
  const char* ext = config.format == ResultFormat::csv ? ".csv" : ".json";

  auto emit = [&](ExperimentResult r) {
    r.config = to_json(config);
    const auto path = out / (r.dataset + "_" + std::string(to_string(r.kind)) + ext);
    emit_results(r, config.format, path);
    std::cout << "wrote " << path.string() << '\n';
  };

  switch (spec.kind) {
    case SweepKind::benchmark:
    case SweepKind::layer_sweep: {
      if (config.datasets.empty()) throw ConfigError("benchmark and layer_sweep need datasets");
      for (const auto& d : config.datasets) {
        if (!o.common.dataset.empty() && d.name != o.common.dataset) continue;
        const auto g = load_dataset(config, d);
        emit(spec.kind == SweepKind::benchmark ? run_benchmark(g, d.name, spec) : run_layer_sweep(g, d.name, spec));
      }
      break;
    }
    case SweepKind::er_sweep: {
      if (!config.datasets.empty()) {
        const auto& d = pick_dataset(config, o.common.dataset);
        emit(run_er_sweep(largest_layer(load_dataset(config, d)), d.name, spec));
      } else {
        const auto s = config.er_surrogate.value_or(SurrogateSpec{});
        const auto base = watts_strogatz(s.nodes, s.k, s.phi, derive_seed(config.seed, {0x73757272ULL}));
        emit(run_er_sweep(base, "surrogate_ws_n" + std::to_string(s.nodes), spec));
      }
      break;
    }
    case SweepKind::ws_sweep:
      emit(run_ws_sweep(spec));
      break;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct ScoreOpts {
  Common common;
  std::string checkpoint;
  std::string pairs;
};

int cmd_score(ScoreOpts& o) {
  json doc = load_doc(o.common.config_file);
  apply_common(doc, o.common);
  const auto config = finish(doc);
  const auto g = load_dataset(config, pick_dataset(config, o.common.dataset));
  const auto ck = load_checkpoint(o.checkpoint);
  if (ck.params.input_dim() != g.num_replicas()) {
    throw DataError("checkpoint expects " + std::to_string(ck.params.input_dim()) + " replicas, graph has " +
                    std::to_string(g.num_replicas()));
  }
  const auto z = embed(Neighborhoods::multiplex(g), ck.params, Features::one_hot(g.num_replicas()),
                       ck.l2_normalize_output);

  std::ifstream file;
  std::istream* in = &std::cin;
  if (o.pairs != "-") {
    file.open(o.pairs);
    if (!file) throw DataError("cannot open pair file " + o.pairs);
    in = &file;
  }
  auto lookup = [&](const std::string& layer, const std::string& label, std::size_t lineno) {
    for (LayerId l = 0; l < g.num_layers(); ++l) {
      if (g.layer_name(l) != layer) continue;
      if (auto r = g.find(l, label)) return *r;
    }
    throw DataError("pairs line " + std::to_string(lineno) + ": unknown replica " + label + "@" + layer);
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(*in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string la, a, lb, b;
    if (!(ls >> la >> a >> lb >> b)) throw DataError("pairs line " + std::to_string(lineno) + ": expected 4 fields");
    const auto u = lookup(la, a, lineno);
    const auto v = lookup(lb, b, lineno);
    std::cout << la << ' ' << a << ' ' << lb << ' ' << b << ' ' << fmt(score_link(z, u, v)) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SplitOpts {
  Common common;
  std::string split_file;
};

int cmd_split_export(SplitOpts& o) {
  json doc = load_doc(o.common.config_file);
  apply_common(doc, o.common);
  const auto config = finish(doc);
  const auto g = load_dataset(config, pick_dataset(config, o.common.dataset));
  const auto split = make_split(g, config.protocol().split, split_seed(run_seed(config.seed, 0)));
  save_split(o.split_file, split, provenance(config).dump());
  std::cout << "wrote " << o.split_file << '\n';
  return kOk;
}

int cmd_split_import(SplitOpts& o) {
  json doc = load_doc(o.common.config_file);
  apply_common(doc, o.common);
  const auto config = finish(doc);
  const auto g = load_dataset(config, pick_dataset(config, o.common.dataset));
  const auto s = load_split(o.split_file, g);
  std::cout << "seed " << s.seed << '\n'
            << "marked " << s.marked.size() << '\n'
            << "train positives " << s.train_pos_intra.size() << " intra, " << s.train_pos_inter.size() << " inter\n"
            << "train negatives " << s.train_neg.size() << '\n'
            << "test positives " << s.test_pos_intra.size() << " intra, " << s.test_pos_inter.size() << " inter\n"
            << "test negatives " << s.test_neg_intra.size() << " intra, " << s.test_neg_inter.size() << " inter\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multisage: multiplex neighborhood-aggregation embeddings and link-prediction experiments"};
  app.require_subcommand(1);

  InspectOpts inspect;
  auto* c_inspect = app.add_subcommand("inspect", "print replica, layer and edge counts of a dataset");
  inspect.common.add_graph(c_inspect);
  c_inspect->add_option("--expect", inspect.expect, "nodes,layers,intra,inter; exit 5 on mismatch");

  TrainOpts train_o;
  auto* c_train = app.add_subcommand("train", "train one model, evaluate on one split, write checkpoint and metrics");
  train_o.common.add_graph(c_train);
  train_o.common.add_seed(c_train);
  train_o.run.add_model(c_train);
  c_train->add_option("--mode", train_o.run.mode, "multisage | graphsage");
  c_train->add_option("--split", train_o.split_file, "use this split file instead of sampling one");
  c_train->add_flag("--embeddings", train_o.write_embeddings, "also write embeddings.tsv");

  SweepOpts sweep;
  auto* c_sweep = app.add_subcommand("sweep", "run a benchmark, layer sweep, ER sweep or WS sweep");
  sweep.common.add_graph(c_sweep);
  sweep.common.add_seed(c_sweep);
  sweep.run.add_model(c_sweep);
  c_sweep->add_option("--kind", sweep.run.kind, "benchmark | layer_sweep | er_sweep | ws_sweep");
  c_sweep->add_option("--modes", sweep.run.modes, "modes to run")->delimiter(',');
  c_sweep->add_option("--runs", sweep.run.runs, "splits per sweep point");
  c_sweep->add_option("--threads", sweep.run.threads, "worker threads (0 = all cores)");
  c_sweep->add_option("--format", sweep.run.format, "csv | json");
  c_sweep->add_option("--grid", sweep.run.grid, "rho or phi values")->delimiter(',');
  c_sweep->add_option("--ws-nodes", sweep.run.ws_nodes, "WS ring size");
  c_sweep->add_option("--ws-k", sweep.run.ws_k, "WS lattice degree");

  ScoreOpts score;
  auto* c_score = app.add_subcommand("score", "print z_u . z_v for pairs of replicas");
  score.common.add_graph(c_score);
  c_score->add_option("--checkpoint", score.checkpoint, "checkpoint file")->required();
  c_score->add_option("--pairs", score.pairs, "file of 'layer label layer label' lines, - for stdin")
      ->default_val("-");

  SplitOpts sexport;
  auto* c_export = app.add_subcommand("split-export", "sample a split and write it to a file");
  sexport.common.add_graph(c_export);
  sexport.common.add_seed(c_export);
  c_export->add_option("--out", sexport.split_file, "split file")->required();

  SplitOpts simport;
  auto* c_import = app.add_subcommand("split-import", "validate a split file against a dataset");
  simport.common.add_graph(c_import);
  c_import->add_option("--split", simport.split_file, "split file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (c_inspect->parsed()) return cmd_inspect(inspect);
    if (c_train->parsed()) return cmd_train(train_o);
    if (c_sweep->parsed()) return cmd_sweep(sweep);
    if (c_score->parsed()) return cmd_score(score);
    if (c_export->parsed()) return cmd_split_export(sexport);
    if (c_import->parsed()) return cmd_split_import(simport);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
