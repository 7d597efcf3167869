#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "tdgfn/errors.hpp"

namespace tdgfn {

// Fully connected topology: sizes from input to output, leaky-rectifier
// hidden activations, linear output layer.
struct MlpSpec {
  std::vector<int> layers;
  double leak = 0.01;
};

// Dense MLP over a flat parameter vector (column-major weights per layer,
// then biases). Forward/backward operate on column batches so callers can
// fold many states into a single matrix product.
class Mlp {
 public:
  Mlp() = default;
  // Fan-scaled uniform init, weights in +-sqrt(6/(fan_in+fan_out)), biases 0.
  Mlp(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.layers.front(); }
  int output_dim() const { return spec_.layers.back(); }
  std::int64_t param_count() const { return params_.size(); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  struct Cache {
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l] = layer l output
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;
  Eigen::VectorXd forward1(const Eigen::VectorXd& x) const;

  // Gradient of sum_cols <out_grad_col, output_col> with respect to every
  // parameter. The cache must come from the matching forward call.
  Eigen::VectorXd backward(const Cache& cache,
                           const Eigen::MatrixXd& out_grad) const;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  std::string to_json() const;
  static Mlp from_json(const std::string& text);

 private:
  int layer_count() const { return static_cast<int>(spec_.layers.size()) - 1; }
  std::int64_t weight_offset(int layer) const { return offsets_[2 * layer]; }
  std::int64_t bias_offset(int layer) const { return offsets_[2 * layer + 1]; }
  void build_offsets();

  MlpSpec spec_;
  std::vector<std::int64_t> offsets_;
  Eigen::VectorXd params_;
  std::uint64_t init_seed_ = 0;
};

// Bias-corrected Adam over a flat parameter vector. Rejects non-finite
// gradients with NumericFault.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m, v;
  std::int64_t step = 0;

  Adam(double learning_rate, std::int64_t n)
      : lr(learning_rate),
        m(Eigen::VectorXd::Zero(n)),
        v(Eigen::VectorXd::Zero(n)) {}

  void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

// Softmax over the entries with mask != 0; masked entries get exactly zero
// probability. Throws ContractViolation when the mask is all false.
Eigen::VectorXd softmax_masked(const Eigen::VectorXd& logits,
                               const std::vector<char>& mask);

// Entropy of a probability vector (zero entries contribute nothing).
double entropy(const Eigen::VectorXd& probs);

}  // namespace tdgfn
