#include "multisage/experiments.hpp"

#include "multisage/config.hpp"
#include "multisage/errors.hpp"
#include "multisage/log.hpp"
#include "multisage/rng.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace multisage {

using nlohmann::json;

std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::benchmark: return "benchmark";
    case SweepKind::layer_sweep: return "layer_sweep";
    case SweepKind::er_sweep: return "er_sweep";
    case SweepKind::ws_sweep: return "ws_sweep";
  }
  return "benchmark";
}

SweepKind parse_sweep_kind(std::string_view s) {
  for (auto k : {SweepKind::benchmark, SweepKind::layer_sweep, SweepKind::er_sweep, SweepKind::ws_sweep})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown sweep kind '" + std::string(s) +
                    "' (expected benchmark, layer_sweep, er_sweep or ws_sweep)");
}

ResultFormat parse_result_format(std::string_view s) {
  if (s == "csv") return ResultFormat::csv;
  if (s == "json") return ResultFormat::json;
  throw ConfigError("unknown result format '" + std::string(s) + "' (expected csv or json)");
}

void ProtocolConfig::validate() const {
  if (hidden_dims.empty()) throw ConfigError("model.hidden_dims must not be empty");
  for (auto d : hidden_dims)
    if (d == 0) throw ConfigError("model.hidden_dims entries must be positive");
  train.validate();
  split.validate();
  if (sampler.q == 0) throw ConfigError("negatives.q must be >= 1");
  if (!std::isfinite(sampler.exponent)) throw ConfigError("negatives.exponent must be finite");
  if (train.neighbor_sample_sizes && train.neighbor_sample_sizes->size() != hidden_dims.size()) {
    throw ConfigError("train.neighbor_sample_sizes needs one entry per hidden layer");
  }
}

void SweepSpec::validate() const {
  protocol.validate();
  if (runs < 1) throw ConfigError("sweep.runs must be >= 1");
  if (shard_count < 1 || shard_index >= shard_count) throw ConfigError("sweep.shard_index must be < shard_count");
  auto modes_copy = modes;
  std::sort(modes_copy.begin(), modes_copy.end());
  if (std::adjacent_find(modes_copy.begin(), modes_copy.end()) != modes_copy.end()) {
    throw ConfigError("sweep.modes contains duplicates");
  }
  if (kind == SweepKind::ws_sweep && (ws_k < 2 || ws_k % 2 != 0 || ws_nodes <= ws_k)) {
    throw ConfigError("sweep.ws_k must be even and >= 2, and ws_nodes > ws_k");
  }
  for (double x : grid) {
    if (kind == SweepKind::er_sweep && !(x >= 0.0 && x <= 1.0)) throw ConfigError("rho grid values must lie in [0, 1]");
    if (kind == SweepKind::ws_sweep && !(x >= 0.0 && x <= 1.0)) throw ConfigError("phi grid values must lie in [0, 1]");
  }
}

std::vector<Mode> SweepSpec::resolved_modes() const {
  if (!modes.empty()) return modes;
  if (kind == SweepKind::er_sweep || kind == SweepKind::ws_sweep) return {Mode::graphsage};
  return {Mode::multisage, Mode::graphsage};
}

std::vector<double> SweepSpec::resolved_grid() const {
  if (!grid.empty()) return grid;
  if (kind == SweepKind::er_sweep) return default_rho_grid();
  if (kind == SweepKind::ws_sweep) return default_phi_grid();
  return {};
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g{0.0};
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    g.push_back(std::pow(10.0, a + t * (b - a)));
  }
  return g;
}

std::vector<double> default_rho_grid() { return log_grid(1e-5, 1e-1, 10); }
std::vector<double> default_phi_grid() { return log_grid(1e-4, 1.0, 10); }

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentResult::config_hash() const { return multisage::config_hash(config); }

const ResultRow* ExperimentResult::find(std::string_view coordinate, Mode mode) const {
  for (const auto& r : rows)
    if (r.coordinate == coordinate && r.mode == mode) return &r;
  return nullptr;
}

std::uint64_t run_seed(std::uint64_t master, std::size_t run) { return derive_seed(master, {run}); }

std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, {0}); }

ModelRun train_and_evaluate(const MultiplexGraph& g, const EvalSplit& split, Mode mode,
                            const ProtocolConfig& protocol, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const auto tg = training_graph(g, split);
  std::vector<std::size_t> dims{g.num_replicas()};
  dims.insert(dims.end(), protocol.hidden_dims.begin(), protocol.hidden_dims.end());
  auto init = ModelParams::glorot(mode, protocol.activation, dims, derive_seed(seed, {1}));
  init.output_activation = protocol.output_activation;
  TrainConfig tc = protocol.train;
  tc.seed = derive_seed(seed, {2});
  NegativeSamplerConfig sc = protocol.sampler;
  sc.seed = derive_seed(seed, {3});
  ModelRun run{train(tg, split.train_positives(), std::move(init), tc, sc, Features::one_hot(g.num_replicas())), {}, 0.0};
  run.eval = evaluate(run.trained.embeddings, split);
  run.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

std::vector<RunRecord> run_once(const MultiplexGraph& g, std::span<const Mode> modes, const ProtocolConfig& protocol,
                                std::uint64_t seed, std::size_t run_index) {
  const auto split = make_split(g, protocol.split, split_seed(seed));
  std::vector<RunRecord> out;
  for (auto mode : modes) {
    const auto m = train_and_evaluate(g, split, mode, protocol, seed);
    RunRecord r;
    r.run = run_index;
    r.seed = seed;
    r.auc_intra = m.eval.auc_intra();
    r.auc_inter = m.eval.auc_inter();
    r.final_loss = m.trained.loss_history.back();
    r.runtime_s = m.runtime_s;
    out.push_back(r);
  }
  return out;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string format_number(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

struct Point {
  std::string coordinate;
  std::optional<double> value;
  std::optional<double> delta;
  std::optional<std::uint64_t> graph_seed;
};

// Runs every (run, mode) of one sweep coordinate and appends one row per mode.
void run_point(const MultiplexGraph& g, const Point& point, const SweepSpec& spec, ExperimentResult& result) {
  const auto modes = spec.resolved_modes();
  std::vector<std::vector<RunRecord>> records(spec.runs);
  parallel_for(spec.runs, spec.threads, [&](std::size_t run) {
    records[run] = run_once(g, modes, spec.protocol, run_seed(spec.master_seed, run), run);
    if (log::enabled(log::Level::info)) {
      std::ostringstream msg;
      msg << point.coordinate << " run " << run + 1 << "/" << spec.runs << " done";
      log::info(msg.str());
    }
  });

  for (std::size_t m = 0; m < modes.size(); ++m) {
    ResultRow row;
    row.coordinate = point.coordinate;
    row.coordinate_value = point.value;
    row.mode = modes[m];
    row.delta = point.delta;
    row.runs = spec.runs;
    row.seed = spec.master_seed;
    row.graph_seed = point.graph_seed;
    std::vector<double> intra, inter;
    for (const auto& per_run : records) {
      const auto& r = per_run[m];
      row.per_run.push_back(r);
      row.runtime_s += r.runtime_s;
      if (r.auc_intra) intra.push_back(*r.auc_intra);
      if (r.auc_inter) inter.push_back(*r.auc_inter);
    }
    if (!intra.empty()) row.auc_intra = aggregate_runs(intra);
    if (!inter.empty()) row.auc_inter = aggregate_runs(inter);
    result.rows.push_back(std::move(row));
  }
}

bool in_shard(const SweepSpec& spec, std::size_t index) { return index % spec.shard_count == spec.shard_index; }

void sort_rows(ExperimentResult& r, const std::vector<std::string>& coordinate_order) {
  auto rank = [&](const std::string& c) {
    return std::find(coordinate_order.begin(), coordinate_order.end(), c) - coordinate_order.begin();
  };
  std::stable_sort(r.rows.begin(), r.rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    const auto ra = rank(a.coordinate), rb = rank(b.coordinate);
    return ra != rb ? ra < rb : a.mode < b.mode;
  });
}

ExperimentResult start(const SweepSpec& spec, SweepKind expected, std::string dataset) {
  if (spec.kind != expected) {
    throw ConfigError("sweep kind is " + std::string(to_string(spec.kind)) + ", expected " +
                      std::string(to_string(expected)));
  }
  spec.validate();
  ExperimentResult r;
  r.kind = spec.kind;
  r.dataset = std::move(dataset);
  r.config = to_json(spec);
  return r;
}

constexpr std::uint64_t kGraphStream = 0x6772617068ULL;

std::vector<double> checked_grid(const SweepSpec& spec, const char* name) {
  auto grid = spec.resolved_grid();
  if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) {
    log::warn(std::string(name) + " grid has no 0 point; the unperturbed baseline will be missing");
  }
  return grid;
}

}  // namespace

ExperimentResult run_benchmark(const MultiplexGraph& g, const std::string& dataset, const SweepSpec& spec) {
  auto result = start(spec, SweepKind::benchmark, dataset);
  if (in_shard(spec, 0)) run_point(g, Point{dataset, std::nullopt, std::nullopt, std::nullopt}, spec, result);
  sort_rows(result, {dataset});
  return result;
}

ExperimentResult run_layer_sweep(const MultiplexGraph& g, const std::string& dataset, const SweepSpec& spec) {
  auto result = start(spec, SweepKind::layer_sweep, dataset);
  if (g.num_layers() < 2) throw DataError("layer sweep needs at least two layers");
  const auto order = layers_by_size(g);
  const auto deltas = delta(g, order);
  std::vector<std::string> coords;
  for (std::size_t L = 2; L <= order.size(); ++L) {
    Point p{"L=" + std::to_string(L), static_cast<double>(L), deltas.points[L - 2].delta, std::nullopt};
    coords.push_back(p.coordinate);
    if (!in_shard(spec, L - 2)) continue;
    const auto sub = layer_subnetwork(g, std::span<const LayerId>(order.data(), L));
    run_point(sub, p, spec, result);
  }
  sort_rows(result, coords);
  return result;
}

ExperimentResult run_er_sweep(const SimpleGraph& base_layer, const std::string& dataset, const SweepSpec& spec) {
  auto result = start(spec, SweepKind::er_sweep, dataset);
  const auto grid = checked_grid(spec, "rho");
  std::vector<std::string> coords;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Point p{"rho=" + format_number(grid[i]), grid[i], std::nullopt, derive_seed(spec.master_seed, {kGraphStream, i})};
    coords.push_back(p.coordinate);
    if (!in_shard(spec, i)) continue;
    const auto g = lift_to_single_layer_multiplex(add_random_links(base_layer, grid[i], *p.graph_seed));
    run_point(g, p, spec, result);
  }
  sort_rows(result, coords);
  return result;
}

ExperimentResult run_ws_sweep(const SweepSpec& spec) {
  auto result = start(spec, SweepKind::ws_sweep,
                      "ws_n" + std::to_string(spec.ws_nodes) + "_k" + std::to_string(spec.ws_k));
  const auto grid = checked_grid(spec, "phi");
  std::vector<std::string> coords;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Point p{"phi=" + format_number(grid[i]), grid[i], std::nullopt, derive_seed(spec.master_seed, {kGraphStream, i})};
    coords.push_back(p.coordinate);
    if (!in_shard(spec, i)) continue;
    const auto g =
        lift_to_single_layer_multiplex(watts_strogatz(spec.ws_nodes, spec.ws_k, grid[i], *p.graph_seed));
    run_point(g, p, spec, result);
  }
  sort_rows(result, coords);
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kCsvColumns =
    "coordinate,mode,auc_intra_mean,auc_intra_std,auc_inter_mean,auc_inter_std,delta,runs,seed,runtime_s";

json stats_json(const std::optional<RunStats>& s) {
  if (!s) return nullptr;
  return {{"mean", s->mean}, {"std", s->std}, {"count", s->count}};
}

std::optional<RunStats> stats_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return RunStats{j.at("mean").get<double>(), j.at("std").get<double>(), j.at("count").get<std::size_t>()};
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

json provenance(const ExperimentResult& r) {
  return {{"tool", "multisage"},
          {"format_version", 1},
          {"config_hash", r.config_hash()},
          {"master_seed", r.config.contains("seed") ? r.config.at("seed") : json(nullptr)},
          {"config", r.config}};
}

json to_json(const ExperimentResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json runs = json::array();
    for (const auto& rec : row.per_run) {
      runs.push_back({{"run", rec.run},
                      {"seed", rec.seed},
                      {"auc_intra", opt_json(rec.auc_intra)},
                      {"auc_inter", opt_json(rec.auc_inter)},
                      {"final_loss", rec.final_loss},
                      {"runtime_s", rec.runtime_s}});
    }
    rows.push_back({{"coordinate", row.coordinate},
                    {"coordinate_value", opt_json(row.coordinate_value)},
                    {"mode", to_string(row.mode)},
                    {"auc_intra", stats_json(row.auc_intra)},
                    {"auc_inter", stats_json(row.auc_inter)},
                    {"delta", opt_json(row.delta)},
                    {"runs", row.runs},
                    {"seed", row.seed},
                    {"graph_seed", opt_json(row.graph_seed)},
                    {"runtime_s", row.runtime_s},
                    {"per_run", runs}});
  }
  return {{"provenance", provenance(r)}, {"kind", to_string(r.kind)}, {"dataset", r.dataset}, {"rows", rows}};
}

ExperimentResult from_json(const json& j) {
  ExperimentResult r;
  r.kind = parse_sweep_kind(j.at("kind").get<std::string>());
  r.dataset = j.at("dataset").get<std::string>();
  r.config = j.at("provenance").at("config");
  for (const auto& jr : j.at("rows")) {
    ResultRow row;
    row.coordinate = jr.at("coordinate").get<std::string>();
    row.coordinate_value = opt_from<double>(jr.at("coordinate_value"));
    row.mode = parse_mode(jr.at("mode").get<std::string>());
    row.auc_intra = stats_from(jr.at("auc_intra"));
    row.auc_inter = stats_from(jr.at("auc_inter"));
    row.delta = opt_from<double>(jr.at("delta"));
    row.runs = jr.at("runs").get<std::size_t>();
    row.seed = jr.at("seed").get<std::uint64_t>();
    row.graph_seed = opt_from<std::uint64_t>(jr.at("graph_seed"));
    row.runtime_s = jr.at("runtime_s").get<double>();
    for (const auto& jrun : jr.at("per_run")) {
      RunRecord rec;
      rec.run = jrun.at("run").get<std::size_t>();
      rec.seed = jrun.at("seed").get<std::uint64_t>();
      rec.auc_intra = opt_from<double>(jrun.at("auc_intra"));
      rec.auc_inter = opt_from<double>(jrun.at("auc_inter"));
      rec.final_loss = jrun.at("final_loss").get<double>();
      rec.runtime_s = jrun.at("runtime_s").get<double>();
      row.per_run.push_back(rec);
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::optional<double> parse_opt_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double x = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("results csv: bad number '" + s + "'");
  return x;
}

void write_csv(std::ostream& out, const ExperimentResult& r) {
  out << "# multisage-results v1\n";
  out << "# kind " << to_string(r.kind) << '\n';
  out << "# dataset " << r.dataset << '\n';
  out << "# config_hash " << r.config_hash() << '\n';
  out << "# master_seed " << (r.config.contains("seed") ? r.config.at("seed").dump() : "null") << '\n';
  out << "# config " << r.config.dump() << '\n';
  out << kCsvColumns << '\n';
  for (const auto& row : r.rows) {
    auto mean = [](const std::optional<RunStats>& s) { return s ? std::optional(s->mean) : std::nullopt; };
    auto sd = [](const std::optional<RunStats>& s) { return s ? std::optional(s->std) : std::nullopt; };
    out << csv_field(row.coordinate) << ',' << to_string(row.mode) << ',' << opt_number(mean(row.auc_intra)) << ','
        << opt_number(sd(row.auc_intra)) << ',' << opt_number(mean(row.auc_inter)) << ','
        << opt_number(sd(row.auc_inter)) << ',' << opt_number(row.delta) << ',' << row.runs << ',' << row.seed << ','
        << format_number(row.runtime_s) << '\n';
  }
}

ExperimentResult read_csv(std::istream& in) {
  ExperimentResult r;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# ", 0) == 0) {
      const auto rest = line.substr(2);
      const auto sp = rest.find(' ');
      const auto key = rest.substr(0, sp);
      const auto value = sp == std::string::npos ? std::string() : rest.substr(sp + 1);
      if (key == "kind") r.kind = parse_sweep_kind(value);
      if (key == "dataset") r.dataset = value;
      if (key == "config") r.config = json::parse(value);
      continue;
    }
    if (!header) {
      if (line != kCsvColumns) throw DataError("results csv: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 10) throw DataError("results csv line " + std::to_string(lineno) + ": expected 10 fields");
    ResultRow row;
    row.coordinate = f[0];
    row.mode = parse_mode(f[1]);
    row.runs = std::stoull(f[7]);
    auto stats = [&](const std::string& m, const std::string& s) -> std::optional<RunStats> {
      auto mv = parse_opt_number(m);
      if (!mv) return std::nullopt;
      return RunStats{*mv, parse_opt_number(s).value_or(0.0), row.runs};
    };
    row.auc_intra = stats(f[2], f[3]);
    row.auc_inter = stats(f[4], f[5]);
    row.delta = parse_opt_number(f[6]);
    row.seed = std::stoull(f[8]);
    row.runtime_s = parse_opt_number(f[9]).value_or(0.0);
    r.rows.push_back(std::move(row));
  }
  if (!header) throw DataError("results csv: missing header");
  return r;
}

}  // namespace

void write_results(std::ostream& out, const ExperimentResult& result, ResultFormat format) {
  if (format == ResultFormat::json) {
    out << to_json(result).dump(2) << '\n';
  } else {
    write_csv(out, result);
  }
}

ExperimentResult read_results(std::istream& in, ResultFormat format) {
  try {
    if (format == ResultFormat::json) return from_json(json::parse(in));
    return read_csv(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("results: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("results: ") + e.what());
  }
}

void emit_results(const ExperimentResult& result, ResultFormat format, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write results file " + path.string());
  write_results(out, result, format);
  if (!out) throw DataError("error writing results file " + path.string());
}

ExperimentResult load_results(const std::filesystem::path& path, ResultFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results file " + path.string());
  return read_results(in, format);
}

}  // namespace multisage
