#include "multisage/ingest.hpp"

#include "multisage/errors.hpp"
#include "multisage/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace multisage {
namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::string body = line.substr(0, line.find('#'));
  std::istringstream in(body);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(std::move(t));
  return tokens;
}

bool is_integer(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_number(const std::string& s) {
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// Orders layer ids numerically when all are integers.
std::vector<std::string> order_layers(std::vector<std::string> ids) {
  const bool numeric = std::all_of(ids.begin(), ids.end(), is_integer);
  std::sort(ids.begin(), ids.end(), [numeric](const std::string& a, const std::string& b) {
    if (numeric) return std::stoll(a) < std::stoll(b);
    return a < b;
  });
  return ids;
}

struct RawIntraEdge {
  std::string layer, u, v;
};

}  // namespace

MultiplexGraph parse_multiplex(std::istream& edges, std::istream* couplings, CouplingPolicy policy,
                               LoadReport* report) {
  if (policy == CouplingPolicy::explicit_file && couplings == nullptr) {
    throw std::invalid_argument("explicit coupling policy requires a coupling file");
  }
  if (policy == CouplingPolicy::derive_shared_label && couplings != nullptr) {
    throw std::invalid_argument("a coupling file is only read under the explicit coupling policy");
  }
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = {};

  std::vector<RawIntraEdge> raw;
  std::vector<std::string> layer_ids;
  std::unordered_map<std::string, char> seen_layer;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(edges, line)) {
    ++lineno;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 3 || tokens.size() > 4 || (tokens.size() == 4 && !is_number(tokens[3]))) {
      throw DataError("line " + std::to_string(lineno) + ": expected 'layer node node [weight]', got '" + line + "'");
    }
    if (!seen_layer.count(tokens[0])) {
      seen_layer.emplace(tokens[0], 1);
      layer_ids.push_back(tokens[0]);
    }
    raw.push_back({tokens[0], tokens[1], tokens[2]});
  }
  rep.lines = lineno;
  if (raw.empty()) throw DataError("edge list contains no edges (" + std::to_string(lineno) + " lines read)");

  auto layers = order_layers(layer_ids);
  std::unordered_map<std::string, LayerId> layer_index;
  for (LayerId l = 0; l < layers.size(); ++l) layer_index.emplace(layers[l], l);

  // Replicas in order of first appearance; build() groups them by layer.
  std::vector<Replica> replicas;
  std::map<std::pair<LayerId, std::string>, ReplicaId> replica_index;
  auto intern = [&](LayerId l, const std::string& label) {
    auto [it, inserted] = replica_index.emplace(std::pair{l, label}, static_cast<ReplicaId>(replicas.size()));
    if (inserted) replicas.push_back({l, label});
    return it->second;
  };
  std::vector<Edge> intra;
  intra.reserve(raw.size());
  for (const auto& e : raw) {
    const LayerId l = layer_index.at(e.layer);
    if (e.u == e.v) {
      ++rep.self_loops_dropped;
      intern(l, e.u);
      continue;
    }
    auto a = intern(l, e.u);
    auto b = intern(l, e.v);
    intra.push_back(Edge{a, b}.canonical());
  }
  std::sort(intra.begin(), intra.end());
  const auto before = intra.size();
  intra.erase(std::unique(intra.begin(), intra.end()), intra.end());
  rep.duplicates_dropped = before - intra.size();

  // Self-loop-only replicas have no intra edge and are not materialized.
  {
    std::vector<char> used(replicas.size(), 0);
    for (const auto& e : intra) used[e.u] = used[e.v] = 1;
    if (std::find(used.begin(), used.end(), 0) != used.end()) {
      std::vector<ReplicaId> remap(replicas.size());
      std::vector<Replica> kept;
      for (ReplicaId n = 0; n < replicas.size(); ++n) {
        remap[n] = static_cast<ReplicaId>(kept.size());
        if (used[n]) kept.push_back(replicas[n]);
      }
      for (auto& e : intra) e = Edge{remap[e.u], remap[e.v]};
      replica_index.clear();
      for (ReplicaId n = 0; n < kept.size(); ++n) replica_index.emplace(std::pair{kept[n].layer, kept[n].label}, n);
      replicas = std::move(kept);
    }
  }

  std::vector<Edge> inter;
  ValidationMode mode = ValidationMode::strict;
  if (policy == CouplingPolicy::derive_shared_label) {
    std::map<std::string, std::vector<ReplicaId>> by_label;
    for (ReplicaId n = 0; n < replicas.size(); ++n) by_label[replicas[n].label].push_back(n);
    for (const auto& [label, members] : by_label) {
      for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j) inter.push_back(Edge{members[i], members[j]}.canonical());
    }
  } else {
    mode = ValidationMode::close;
    std::size_t cl = 0;
    while (std::getline(*couplings, line)) {
      ++cl;
      auto t = tokenize(line);
      if (t.empty()) continue;
      if (t.size() != 4) {
        throw DataError("coupling line " + std::to_string(cl) + ": expected 'layer node layer node', got '" + line + "'");
      }
      auto lookup = [&](const std::string& layer, const std::string& label) {
        auto li = layer_index.find(layer);
        if (li != layer_index.end()) {
          auto it = replica_index.find({li->second, label});
          if (it != replica_index.end()) return it->second;
        }
        throw DataError("coupling line " + std::to_string(cl) + ": unknown replica " + label + "@" + layer);
      };
      auto a = lookup(t[0], t[1]);
      auto b = lookup(t[2], t[3]);
      if (a == b) throw DataError("coupling line " + std::to_string(cl) + ": self-coupling");
      inter.push_back(Edge{a, b}.canonical());
    }
    std::sort(inter.begin(), inter.end());
    inter.erase(std::unique(inter.begin(), inter.end()), inter.end());
  }

  rep.replicas_before_lcc = replicas.size();
  return MultiplexGraph::build(std::move(layers), std::move(replicas), intra, inter, mode);
}

MultiplexGraph load_multiplex(const std::filesystem::path& edge_file,
                              const std::optional<std::filesystem::path>& coupling_file, CouplingPolicy policy,
                              LoadReport* report) {
  std::ifstream edges(edge_file);
  if (!edges) throw DataError("cannot open edge list " + edge_file.string());
  std::ifstream couplings;
  std::istream* coupling_stream = nullptr;
  if (coupling_file) {
    couplings.open(*coupling_file);
    if (!couplings) throw DataError("cannot open coupling file " + coupling_file->string());
    coupling_stream = &couplings;
  }
  try {
    return largest_connected_component(parse_multiplex(edges, coupling_stream, policy, report));
  } catch (const DataError& e) {
    throw DataError(edge_file.string() + ": " + e.what());
  }
}

SimpleGraph add_random_links(const SimpleGraph& g, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("add_random_links: rho must lie in [0, 1]");
  SimpleGraph out;
  out.num_nodes = g.num_nodes;
  out.labels = g.labels;
  const auto n = static_cast<ReplicaId>(g.num_nodes);
  std::vector<Edge> sample;
  if (rho >= 1.0) {
    for (ReplicaId v = 1; v < n; ++v)
      for (ReplicaId w = 0; w < v; ++w) sample.emplace_back(w, v);
  } else if (rho > 0.0) {
    // Geometric skipping over the lexicographic pair sequence (w < v).
    Rng rng(seed);
    const double log_q = std::log1p(-rho);
    std::int64_t v = 1, w = -1;
    while (v < n) {
      const double r = uniform01(rng);
      w += 1 + static_cast<std::int64_t>(std::floor(std::log1p(-r) / log_q));
      while (w >= v && v < n) {
        w -= v;
        ++v;
      }
      if (v < n) sample.emplace_back(static_cast<ReplicaId>(w), static_cast<ReplicaId>(v));
    }
  }
  std::sort(sample.begin(), sample.end());
  std::vector<Edge> base = g.edges;
  for (auto& e : base) e = e.canonical();
  std::sort(base.begin(), base.end());
  std::set_union(base.begin(), base.end(), sample.begin(), sample.end(), std::back_inserter(out.edges));
  out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
  return out;
}

SimpleGraph watts_strogatz(std::size_t n, std::size_t k, double phi, std::uint64_t seed) {
  if (k < 2 || k % 2 != 0) throw std::invalid_argument("watts_strogatz: k must be even and >= 2");
  if (n <= k) throw std::invalid_argument("watts_strogatz: n must exceed k");
  if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("watts_strogatz: phi must lie in [0, 1]");

  std::vector<std::vector<ReplicaId>> adj(n);
  auto linked = [&](ReplicaId a, ReplicaId b) { return std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end(); };
  auto unlink = [&](ReplicaId a, ReplicaId b) {
    std::erase(adj[a], b);
    std::erase(adj[b], a);
  };
  auto link = [&](ReplicaId a, ReplicaId b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 1; j <= k / 2; ++j) link(static_cast<ReplicaId>(i), static_cast<ReplicaId>((i + j) % n));

  Rng rng(seed);
  for (std::size_t j = 1; j <= k / 2; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!bernoulli(rng, phi)) continue;
      const auto a = static_cast<ReplicaId>(i);
      if (adj[a].size() >= n - 1) continue;
      ReplicaId t;
      do {
        t = static_cast<ReplicaId>(uniform_index(rng, n));
      } while (t == a || linked(a, t));
      unlink(a, static_cast<ReplicaId>((i + j) % n));
      link(a, t);
    }
  }

  SimpleGraph out;
  out.num_nodes = n;
  for (ReplicaId a = 0; a < n; ++a)
    for (auto b : adj[a])
      if (a < b) out.edges.emplace_back(a, b);
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

MultiplexGraph lift_to_single_layer_multiplex(const SimpleGraph& g, std::string layer_name) {
  std::vector<Replica> replicas;
  replicas.reserve(g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    replicas.push_back({0, g.labels.empty() ? std::to_string(i) : g.labels[i]});
  return MultiplexGraph::build({std::move(layer_name)}, std::move(replicas), g.edges, {});
}

SimpleGraph largest_layer(const MultiplexGraph& g) {
  if (g.num_layers() == 0) return {};
  LayerId best = 0;
  for (LayerId l = 1; l < g.num_layers(); ++l)
    if (g.layer_size(l) > g.layer_size(best)) best = l;
  const ReplicaId begin = g.layer_begin(best);
  SimpleGraph out;
  out.num_nodes = g.layer_size(best);
  for (ReplicaId n = begin; n < g.layer_end(best); ++n) {
    out.labels.push_back(g.replica(n).label);
    for (auto m : g.intra_neighbors(n))
      if (n < m) out.edges.emplace_back(n - begin, m - begin);
  }
  return out;
}

}  // namespace multisage
