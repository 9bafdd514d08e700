#include "multisage/model.hpp"

#include "multisage/errors.hpp"
#include "multisage/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace multisage {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string_view to_string(Mode m) { return m == Mode::multisage ? "multisage" : "graphsage"; }

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

Mode parse_mode(std::string_view s) {
  if (s == "multisage") return Mode::multisage;
  if (s == "graphsage") return Mode::graphsage;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

void ModelParams::validate() const {
  if (dims.size() < 2) throw std::invalid_argument("model needs at least one aggregation depth");
  if (layers.size() + 1 != dims.size()) throw std::invalid_argument("dims and layer count disagree");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto rows = static_cast<Eigen::Index>(dims[k + 1]);
    const auto cols = static_cast<Eigen::Index>(dims[k]);
    const auto& w = layers[k];
    auto check = [&](const Eigen::MatrixXd& m, const char* name) {
      if (m.rows() != rows || m.cols() != cols) {
        throw std::invalid_argument(std::string(name) + " at depth " + std::to_string(k + 1) + " has shape " +
                                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
      }
      if (!m.allFinite()) throw NumericError(std::string(name) + " has non-finite entries");
    };
    check(w.horizontal, "W_H");
    check(w.self, "S");
    if (mode == Mode::multisage) {
      check(w.vertical, "W_V");
    } else if (w.vertical.size() != 0) {
      throw std::invalid_argument("graphsage mode has no W_V");
    }
  }
}

ModelParams ModelParams::zeros(Mode mode, Activation activation, std::vector<std::size_t> dims) {
  ModelParams p;
  p.mode = mode;
  p.activation = activation;
  p.dims = std::move(dims);
  for (std::size_t k = 1; k < p.dims.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(p.dims[k]);
    const auto c = static_cast<Eigen::Index>(p.dims[k - 1]);
    DepthWeights w;
    w.horizontal = Eigen::MatrixXd::Zero(r, c);
    if (mode == Mode::multisage) w.vertical = Eigen::MatrixXd::Zero(r, c);
    w.self = Eigen::MatrixXd::Zero(r, c);
    p.layers.push_back(std::move(w));
  }
  p.validate();
  return p;
}

ModelParams ModelParams::glorot(Mode mode, Activation activation, std::vector<std::size_t> dims, std::uint64_t seed) {
  ModelParams p = zeros(mode, activation, std::move(dims));
  p.seed = seed;
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const double a = std::sqrt(6.0 / static_cast<double>(p.dims[k] + p.dims[k + 1]));
    auto fill = [&](Eigen::MatrixXd& m, std::uint64_t role) {
      Rng rng(derive_seed(seed, {k, role}));
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform_real(rng, -a, a);
    };
    fill(p.layers[k].horizontal, 0);
    if (mode == Mode::multisage) fill(p.layers[k].vertical, 1);
    fill(p.layers[k].self, 2);
  }
  return p;
}

ModelGradients zero_gradients(const ModelParams& p) {
  ModelGradients g(p.layers.size());
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    g[k].horizontal = Eigen::MatrixXd::Zero(p.layers[k].horizontal.rows(), p.layers[k].horizontal.cols());
    g[k].vertical = Eigen::MatrixXd::Zero(p.layers[k].vertical.rows(), p.layers[k].vertical.cols());
    g[k].self = Eigen::MatrixXd::Zero(p.layers[k].self.rows(), p.layers[k].self.cols());
  }
  return g;
}

Features Features::one_hot(std::size_t num_nodes) {
  Features f;
  f.one_hot_ = true;
  f.num_nodes_ = num_nodes;
  return f;
}

Features Features::dense(Eigen::MatrixXd x) {
  Features f;
  f.one_hot_ = false;
  f.num_nodes_ = static_cast<std::size_t>(x.rows());
  f.columns_ = x.transpose();
  return f;
}

}  // namespace multisage
