#include "multisage/errors.hpp"
#include "multisage/eval.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace multisage {
namespace {

constexpr const char* kHeader = "# multisage-split v1";

void write_records(std::ostream& out, const char* set, const char* type, const std::vector<Edge>& edges, int label) {
  for (const auto& e : edges) out << set << ' ' << type << ' ' << e.u << ' ' << e.v << ' ' << label << '\n';
}

}  // namespace

void write_split(std::ostream& out, const EvalSplit& split, std::string_view provenance) {
  out << kHeader << '\n';
  if (!provenance.empty()) {
    if (provenance.find('\n') != std::string_view::npos) throw std::invalid_argument("split provenance must be one line");
    out << "# config " << provenance << '\n';
  }
  out << "seed " << split.seed << '\n';
  out << "marked " << split.marked.size();
  for (auto m : split.marked) out << ' ' << m;
  out << '\n';
  write_records(out, "train", "intra", split.train_pos_intra, 1);
  write_records(out, "train", "inter", split.train_pos_inter, 1);
  write_records(out, "test", "intra", split.test_pos_intra, 1);
  write_records(out, "test", "inter", split.test_pos_inter, 1);
  write_records(out, "test", "intra", split.test_neg_intra, 0);
  write_records(out, "test", "inter", split.test_neg_inter, 0);
  // Train negatives mix both types; the type column is informative only.
  for (const auto& e : split.train_neg) out << "train any " << e.u << ' ' << e.v << " 0\n";
}

EvalSplit read_split(std::istream& in, const MultiplexGraph& g) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError("split line " + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(in, line) || line != kHeader) throw DataError("split: missing header '" + std::string(kHeader) + "'");
  ++lineno;

  EvalSplit s;
  bool have_seed = false, have_marked = false;
  const auto n = g.num_replicas();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "seed") {
      if (!(ls >> s.seed)) throw fail("bad seed");
      have_seed = true;
      continue;
    }
    if (key == "marked") {
      std::size_t count = 0;
      if (!(ls >> count)) throw fail("bad marked count");
      s.marked.resize(count);
      for (auto& m : s.marked) {
        if (!(ls >> m) || m >= n) throw fail("bad marked replica");
      }
      have_marked = true;
      continue;
    }
    std::string type;
    ReplicaId u = 0, v = 0;
    int label = -1;
    if (!(ls >> type >> u >> v >> label) || (label != 0 && label != 1)) throw fail("malformed record");
    if (u >= n || v >= n || u == v) throw fail("replica index out of range for this graph");
    const Edge e = Edge{u, v}.canonical();
    const bool edge = g.has_edge(u, v);
    if (label == 1 && !edge) throw fail("positive pair is not an edge of the graph");
    if (label == 0 && edge) throw fail("negative pair is an edge of the graph");
    const LinkType actual = g.pair_type(u, v);
    if ((type == "intra" && actual != LinkType::intra) || (type == "inter" && actual != LinkType::inter)) {
      throw fail("link type does not match the graph");
    }
    if (type != "intra" && type != "inter" && type != "any") throw fail("unknown link type '" + type + "'");

    const bool intra = actual == LinkType::intra;
    if (key == "train") {
      if (label == 1) {
        (intra ? s.train_pos_intra : s.train_pos_inter).push_back(e);
      } else {
        s.train_neg.push_back(e);
      }
    } else if (key == "test") {
      if (label == 1) {
        (intra ? s.test_pos_intra : s.test_pos_inter).push_back(e);
      } else {
        (intra ? s.test_neg_intra : s.test_neg_inter).push_back(e);
      }
    } else {
      throw fail("unknown set '" + key + "'");
    }
  }
  if (!have_seed || !have_marked) throw DataError("split: missing seed or marked line");
  for (auto* v : {&s.train_pos_intra, &s.train_pos_inter, &s.test_pos_intra, &s.test_pos_inter, &s.train_neg,
                  &s.test_neg_intra, &s.test_neg_inter})
    std::sort(v->begin(), v->end());
  std::sort(s.marked.begin(), s.marked.end());
  return s;
}

void save_split(const std::filesystem::path& path, const EvalSplit& split, std::string_view provenance) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split file " + path.string());
  write_split(out, split, provenance);
  if (!out) throw DataError("error writing split file " + path.string());
}

EvalSplit load_split(const std::filesystem::path& path, const MultiplexGraph& g) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file " + path.string());
  try {
    return read_split(in, g);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace multisage
