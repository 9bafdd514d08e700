#include "multisage/checkpoint.hpp"

#include "multisage/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace multisage {
namespace {

void write_matrix(std::ostream& out, std::size_t depth, const char* name, const Eigen::MatrixXd& m) {
  out << "matrix " << depth << ' ' << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint truncated: expected '" + key + "'");
  if (line.rfind(key + " ", 0) != 0) throw DataError("checkpoint: expected '" + key + "', got '" + line + "'");
  return line.substr(key.size() + 1);
}

Eigen::MatrixXd read_matrix(std::istream& in, std::size_t depth, const std::string& name, Eigen::Index rows,
                            Eigen::Index cols) {
  std::istringstream header(expect_key(in, "matrix"));
  std::size_t d = 0;
  std::string n;
  Eigen::Index r = 0, c = 0;
  header >> d >> n >> r >> c;
  if (!header || d != depth || n != name || r != rows || c != cols) {
    throw DataError("checkpoint: unexpected matrix header for " + name + " at depth " + std::to_string(depth));
  }
  Eigen::MatrixXd m(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw DataError("checkpoint truncated inside " + name);
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (Eigen::Index j = 0; j < cols; ++j) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw DataError("checkpoint: bad number in " + name);
      m(i, j) = v;
      p = next;
    }
  }
  return m;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const auto& p = ck.params;
  out << "multisage-checkpoint " << kCheckpointVersion << '\n';
  if (!ck.provenance.empty()) {
    if (ck.provenance.find('\n') != std::string::npos) throw std::invalid_argument("checkpoint provenance must be one line");
    out << "provenance " << ck.provenance << '\n';
  }
  out << "mode " << to_string(p.mode) << '\n';
  out << "activation " << to_string(p.activation) << '\n';
  out << "output_activation " << to_string(p.output_activation) << '\n';
  out << "normalize " << (ck.l2_normalize_output ? 1 : 0) << '\n';
  out << "seed " << p.seed << '\n';
  out << "dims " << p.dims.size();
  for (auto d : p.dims) out << ' ' << d;
  out << '\n';
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    write_matrix(out, k + 1, "W_H", p.layers[k].horizontal);
    if (p.mode == Mode::multisage) write_matrix(out, k + 1, "W_V", p.layers[k].vertical);
    write_matrix(out, k + 1, "S", p.layers[k].self);
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("multisage-checkpoint ", 0) != 0) {
    throw DataError("not a multisage checkpoint");
  }
  if (std::stoi(line.substr(21)) != kCheckpointVersion) throw DataError("unsupported checkpoint version: " + line);
  Checkpoint ck;
  if (in.peek() == 'p') ck.provenance = expect_key(in, "provenance");
  const Mode mode = parse_mode(expect_key(in, "mode"));
  const Activation act = parse_activation(expect_key(in, "activation"));
  const Activation out_act = parse_activation(expect_key(in, "output_activation"));
  ck.l2_normalize_output = expect_key(in, "normalize") == "1";
  const std::uint64_t seed = std::stoull(expect_key(in, "seed"));
  std::istringstream dims_in(expect_key(in, "dims"));
  std::size_t count = 0;
  dims_in >> count;
  std::vector<std::size_t> dims(count);
  for (auto& d : dims) dims_in >> d;
  if (!dims_in || count < 2) throw DataError("checkpoint: bad dims line");

  ck.params = ModelParams::zeros(mode, act, dims);
  ck.params.seed = seed;
  ck.params.output_activation = out_act;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(dims[k + 1]);
    const auto c = static_cast<Eigen::Index>(dims[k]);
    ck.params.layers[k].horizontal = read_matrix(in, k + 1, "W_H", r, c);
    if (mode == Mode::multisage) ck.params.layers[k].vertical = read_matrix(in, k + 1, "W_V", r, c);
    ck.params.layers[k].self = read_matrix(in, k + 1, "S", r, c);
  }
  if (!std::getline(in, line) || line != "end") throw DataError("checkpoint: missing end marker");
  ck.params.validate();
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ck);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace multisage
