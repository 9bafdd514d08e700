#include "multisage/config.hpp"

#include "multisage/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <type_traits>

namespace multisage {

using nlohmann::json;

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seeds are read through the size_t accessor");

std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }
Optimizer parse_optimizer(std::string_view s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected adam or sgd)");
}

std::string_view to_string(NegativeDistribution d) {
  return d == NegativeDistribution::uniform ? "uniform" : "degree_power";
}
NegativeDistribution parse_distribution(std::string_view s) {
  if (s == "uniform") return NegativeDistribution::uniform;
  if (s == "degree_power") return NegativeDistribution::degree_power;
  throw ConfigError("unknown negative distribution '" + std::string(s) + "' (expected uniform or degree_power)");
}

std::string_view to_string(CouplingPolicy p) {
  return p == CouplingPolicy::derive_shared_label ? "derive_shared_label" : "explicit";
}
CouplingPolicy parse_policy(std::string_view s) {
  if (s == "derive_shared_label") return CouplingPolicy::derive_shared_label;
  if (s == "explicit") return CouplingPolicy::explicit_file;
  throw ConfigError("unknown coupling policy '" + std::string(s) + "' (expected derive_shared_label or explicit)");
}

std::string_view to_string(log::Level l) {
  switch (l) {
    case log::Level::debug: return "debug";
    case log::Level::info: return "info";
    case log::Level::warn: return "warn";
    case log::Level::error: return "error";
    case log::Level::off: return "off";
  }
  return "warn";
}
log::Level parse_level(std::string_view s) {
  for (auto l : {log::Level::debug, log::Level::info, log::Level::warn, log::Level::error, log::Level::off})
    if (to_string(l) == s) return l;
  throw ConfigError("unknown log level '" + std::string(s) + "'");
}

std::string_view to_string(ResultFormat f) { return f == ResultFormat::csv ? "csv" : "json"; }

// Typed access to one object; remembers which keys were read so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  [[nodiscard]] bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& at(const char* key) { return j_.at(key); }
  [[nodiscard]] std::string where(const char* key) const { return path_ + "." + key; }

  void get(const char* key, std::size_t& out) {
    if (!has(key)) return;
    out = as_size(j_.at(key), where(key));
  }
  void get(const char* key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    out = v.get<double>();
  }
  void get(const char* key, bool& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + " must be a boolean");
    out = v.get<bool>();
  }
  void get(const char* key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    out = v.get<std::string>();
  }
  std::optional<std::string> string(const char* key) {
    if (!has(key)) return std::nullopt;
    std::string s;
    get(key, s);
    return s;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + path_ + "." + k + "'");
    }
  }

  static std::uint64_t as_size(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(where + " must be a non-negative integer");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

std::vector<std::size_t> size_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of integers");
  std::vector<std::size_t> out;
  for (const auto& x : v) out.push_back(Section::as_size(x, where));
  return out;
}

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void parse_model(Section s, RunConfig& c) {
  auto& p = c.sweep.protocol;
  if (auto m = s.string("mode")) c.mode = parse_mode(*m);
  if (auto a = s.string("activation")) p.activation = parse_activation(*a);
  if (auto a = s.string("output_activation")) p.output_activation = parse_activation(*a);
  if (s.has("hidden_dims")) p.hidden_dims = size_list(s.at("hidden_dims"), s.where("hidden_dims"));
  s.get("normalize", p.train.l2_normalize_output);
  s.finish();
}

void parse_train(Section s, TrainConfig& t) {
  if (auto o = s.string("optimizer")) t.optimizer = parse_optimizer(*o);
  s.get("learning_rate", t.learning_rate);
  s.get("beta1", t.beta1);
  s.get("beta2", t.beta2);
  s.get("epsilon", t.epsilon);
  s.get("epochs", t.epochs);
  s.get("batch_size", t.batch_size);
  if (s.has("neighbor_sample_sizes")) {
    t.neighbor_sample_sizes = size_list(s.at("neighbor_sample_sizes"), s.where("neighbor_sample_sizes"));
  }
  s.finish();
}

void parse_negatives(Section s, NegativeSamplerConfig& n) {
  s.get("q", n.q);
  if (auto d = s.string("distribution")) n.distribution = parse_distribution(*d);
  s.get("exponent", n.exponent);
  s.finish();
}

void parse_split(Section s, SplitConfig& sp) {
  s.get("marked_fraction", sp.marked_fraction);
  s.get("intra_test_fraction", sp.intra_test_fraction);
  s.get("intra_negative_fraction", sp.intra_negative_fraction);
  s.get("inter_negative_fraction", sp.inter_negative_fraction);
  s.get("negative_cap_ratio", sp.negative_cap_ratio);
  s.get("both_endpoints_marked", sp.both_endpoints_marked);
  s.finish();
}

void parse_sweep(Section s, RunConfig& c) {
  auto& sw = c.sweep;
  if (auto k = s.string("kind")) sw.kind = parse_sweep_kind(*k);
  s.get("runs", sw.runs);
  if (s.has("modes")) {
    const auto& v = s.at("modes");
    if (!v.is_array()) throw ConfigError(s.where("modes") + " must be an array of strings");
    sw.modes.clear();
    for (const auto& m : v) {
      if (!m.is_string()) throw ConfigError(s.where("modes") + " must be an array of strings");
      sw.modes.push_back(parse_mode(m.get<std::string>()));
    }
  }
  if (s.has("grid")) sw.grid = number_list(s.at("grid"), s.where("grid"));
  s.get("ws_nodes", sw.ws_nodes);
  s.get("ws_k", sw.ws_k);
  s.get("threads", sw.threads);
  s.get("shard_index", sw.shard_index);
  s.get("shard_count", sw.shard_count);
  if (s.has("er_surrogate")) {
    Section e(s.at("er_surrogate"), s.where("er_surrogate"));
    SurrogateSpec sur;
    e.get("nodes", sur.nodes);
    e.get("k", sur.k);
    e.get("phi", sur.phi);
    e.finish();
    c.er_surrogate = sur;
  }
  s.finish();
}

void parse_datasets(const json& v, RunConfig& c) {
  if (!v.is_array()) throw ConfigError("datasets must be an array");
  for (std::size_t i = 0; i < v.size(); ++i) {
    Section s(v[i], "datasets[" + std::to_string(i) + "]");
    DatasetSpec d;
    s.get("name", d.name);
    std::string edges;
    s.get("edges", edges);
    if (edges.empty()) throw ConfigError(s.where("edges") + " is required");
    d.edges = edges;
    if (auto cp = s.string("couplings")) d.couplings = *cp;
    if (auto p = s.string("coupling_policy")) d.coupling_policy = parse_policy(*p);
    s.finish();
    if (d.coupling_policy == CouplingPolicy::explicit_file && !d.couplings) {
      throw ConfigError(s.where("couplings") + " is required with coupling_policy=explicit");
    }
    if (d.coupling_policy == CouplingPolicy::derive_shared_label && d.couplings) {
      throw ConfigError(s.where("couplings") + " needs coupling_policy=explicit");
    }
    if (d.name.empty()) d.name = d.edges.stem().string();
    c.datasets.push_back(std::move(d));
  }
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  Section root(doc, "config");
  std::size_t version = 0;
  root.get("schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("config.schema_version must be " + std::to_string(kConfigSchemaVersion));
  }
  RunConfig c;
  c.sweep.threads = 0;  // sweeps default to every core
  root.get("seed", c.seed);
  if (auto d = root.string("data_dir")) c.data_dir = *d;
  if (root.has("datasets")) parse_datasets(root.at("datasets"), c);
  if (root.has("model")) parse_model(Section(root.at("model"), "model"), c);
  if (root.has("train")) parse_train(Section(root.at("train"), "train"), c.sweep.protocol.train);
  if (root.has("negatives")) parse_negatives(Section(root.at("negatives"), "negatives"), c.sweep.protocol.sampler);
  if (root.has("split")) parse_split(Section(root.at("split"), "split"), c.sweep.protocol.split);
  if (root.has("sweep")) parse_sweep(Section(root.at("sweep"), "sweep"), c);
  if (root.has("output")) {
    Section o(root.at("output"), "output");
    if (auto d = o.string("dir")) c.output_dir = *d;
    if (auto f = o.string("format")) c.format = parse_result_format(*f);
    o.finish();
  }
  if (auto l = root.string("log_level")) c.log_level = parse_level(*l);
  root.finish();

  c.sweep.master_seed = c.seed;
  c.sweep.validate();
  if (c.er_surrogate) {
    // Same checks the generator applies, surfaced as config errors.
    const auto& s = *c.er_surrogate;
    if (s.k < 2 || s.k % 2 || s.nodes <= s.k || !(s.phi >= 0.0 && s.phi <= 1.0)) {
      throw ConfigError("sweep.er_surrogate needs even k >= 2, nodes > k and phi in [0, 1]");
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const ProtocolConfig& p) {
  const auto& t = p.train;
  json train = {{"optimizer", to_string(t.optimizer)},
                {"learning_rate", t.learning_rate},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"neighbor_sample_sizes", nullptr}};
  if (t.neighbor_sample_sizes) train["neighbor_sample_sizes"] = *t.neighbor_sample_sizes;
  const auto& s = p.split;
  return {{"model",
           {{"activation", to_string(p.activation)},
            {"output_activation", to_string(p.output_activation)},
            {"hidden_dims", p.hidden_dims},
            {"normalize", t.l2_normalize_output}}},
          {"train", train},
          {"negatives",
           {{"q", p.sampler.q},
            {"distribution", to_string(p.sampler.distribution)},
            {"exponent", p.sampler.exponent}}},
          {"split",
           {{"marked_fraction", s.marked_fraction},
            {"intra_test_fraction", s.intra_test_fraction},
            {"intra_negative_fraction", s.intra_negative_fraction},
            {"inter_negative_fraction", s.inter_negative_fraction},
            {"negative_cap_ratio", s.negative_cap_ratio},
            {"both_endpoints_marked", s.both_endpoints_marked}}}};
}

json to_json(const SweepSpec& spec) {
  json modes = json::array();
  for (auto m : spec.resolved_modes()) modes.push_back(to_string(m));
  json j = to_json(spec.protocol);
  j["seed"] = spec.master_seed;
  j["sweep"] = {{"kind", to_string(spec.kind)},
                {"runs", spec.runs},
                {"modes", modes},
                {"grid", spec.grid},
                {"ws_nodes", spec.ws_nodes},
                {"ws_k", spec.ws_k},
                {"threads", spec.threads},
                {"shard_index", spec.shard_index},
                {"shard_count", spec.shard_count}};
  return j;
}

json to_json(const RunConfig& c) {
  json j = to_json(c.sweep);
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["model"]["mode"] = to_string(c.mode);
  j["data_dir"] = c.data_dir ? json(c.data_dir->string()) : json(nullptr);
  json ds = json::array();
  for (const auto& d : c.datasets) {
    ds.push_back({{"name", d.name},
                  {"edges", d.edges.string()},
                  {"couplings", d.couplings ? json(d.couplings->string()) : json(nullptr)},
                  {"coupling_policy", to_string(d.coupling_policy)}});
  }
  j["datasets"] = ds;
  // Modes stay as written so an empty list keeps meaning "default".
  json modes = json::array();
  for (auto m : c.sweep.modes) modes.push_back(to_string(m));
  j["sweep"]["modes"] = modes;
  if (c.er_surrogate) {
    j["sweep"]["er_surrogate"] = {
        {"nodes", c.er_surrogate->nodes}, {"k", c.er_surrogate->k}, {"phi", c.er_surrogate->phi}};
  }
  j["output"] = {{"dir", c.output_dir.string()}, {"format", to_string(c.format)}};
  j["log_level"] = to_string(c.log_level);
  return j;
}

std::filesystem::path resolve_data_path(const RunConfig& config, const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  if (config.data_dir) return *config.data_dir / p;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return std::filesystem::path(env) / p;
  return p;
}

}  // namespace multisage
