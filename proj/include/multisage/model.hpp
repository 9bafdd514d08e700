#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace multisage {

enum class Activation { relu, sigmoid, identity };

/// multisage: separate intra (W_H) and inter (W_V) neighborhood matrices.
/// graphsage: one matrix over the flattened neighborhood; W_V is absent.
enum class Mode { multisage, graphsage };

std::string_view to_string(Activation a);
std::string_view to_string(Mode m);
Activation parse_activation(std::string_view s);
Mode parse_mode(std::string_view s);

/// Weights of one aggregation depth k; each matrix is d_k x d_{k-1}.
struct DepthWeights {
  Eigen::MatrixXd horizontal;  // W_H (or the single W in graphsage mode)
  Eigen::MatrixXd vertical;    // W_V; 0x0 in graphsage mode
  Eigen::MatrixXd self;        // S
};

struct ModelParams {
  Mode mode = Mode::multisage;
  /// θ at depths 1..K-1.
  Activation activation = Activation::relu;
  /// θ at depth K.
  Activation output_activation = Activation::identity;
  std::vector<std::size_t> dims;  // d_0 .. d_K
  std::vector<DepthWeights> layers;  // depth 1..K stored at index 0..K-1
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t depth() const { return layers.size(); }
  [[nodiscard]] std::size_t input_dim() const { return dims.front(); }
  [[nodiscard]] std::size_t output_dim() const { return dims.back(); }
  [[nodiscard]] Activation activation_at(std::size_t k) const { return k == depth() ? output_activation : activation; }

  /// Throws std::invalid_argument on shape or finiteness violations.
  void validate() const;

  /// Glorot-uniform initialisation. Each matrix draws from its own stream
  /// derived from (seed, depth, role), so W_H and S coincide across modes.
  static ModelParams glorot(Mode mode, Activation activation, std::vector<std::size_t> dims, std::uint64_t seed);
  static ModelParams zeros(Mode mode, Activation activation, std::vector<std::size_t> dims);
};

/// Same shapes as ModelParams; vertical is 0x0 in graphsage mode.
using ModelGradients = std::vector<DepthWeights>;

ModelGradients zero_gradients(const ModelParams& p);

/// Input features h^0. One-hot features (x_{n,i} = δ_{ni}) are implicit and
/// never materialised.
class Features {
 public:
  static Features one_hot(std::size_t num_nodes);
  /// `x` is num_nodes x d_0, one row per node.
  static Features dense(Eigen::MatrixXd x);

  [[nodiscard]] bool is_one_hot() const { return one_hot_; }
  [[nodiscard]] std::size_t num_nodes() const { return num_nodes_; }
  [[nodiscard]] std::size_t dim() const { return one_hot_ ? num_nodes_ : static_cast<std::size_t>(columns_.rows()); }
  /// Column-per-node matrix (d_0 x N); only valid for dense features.
  [[nodiscard]] const Eigen::MatrixXd& columns() const { return columns_; }

 private:
  bool one_hot_ = true;
  std::size_t num_nodes_ = 0;
  Eigen::MatrixXd columns_;
};

}  // namespace multisage
