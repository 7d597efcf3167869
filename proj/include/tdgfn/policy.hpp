#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "tdgfn/hypergrid.hpp"
#include "tdgfn/nn.hpp"
#include "tdgfn/rng.hpp"

namespace tdgfn {

// Column-batched action distribution over the ndim+1 action slots. Illegal
// (or pruned) actions must come back with probability exactly zero.
class BatchPolicy {
 public:
  virtual ~BatchPolicy() = default;
  virtual Eigen::MatrixXd action_probs(
      const Hypergrid& env, const std::vector<StateId>& states) const = 0;
};

// Uniform over the legal actions of each state.
class UniformPolicy : public BatchPolicy {
 public:
  Eigen::MatrixXd action_probs(
      const Hypergrid& env, const std::vector<StateId>& states) const override;
};

// Masked softmax over the logits of a network. The mask defaults to plain
// action legality; samplers restricted to a pruned graph install their own.
class NetPolicy : public BatchPolicy {
 public:
  using MaskFn = std::function<std::vector<char>(const Hypergrid&, StateId)>;

  explicit NetPolicy(const Mlp* net) : net_(net) {}
  NetPolicy(const Mlp* net, MaskFn mask) : net_(net), mask_(std::move(mask)) {}

  Eigen::MatrixXd action_probs(
      const Hypergrid& env, const std::vector<StateId>& states) const override;

 private:
  const Mlp* net_;
  MaskFn mask_;
};

struct Trajectory {
  std::vector<StateId> states;  // root ... terminal twin
  double terminal_reward = 0.0;
};

// Batched forward rollouts from the root. Each walker samples actions from
// the policy, mixed with a uniform-legal action with probability `explore`.
// Trajectories carry the true terminal reward. Walkers advance in lockstep
// and consume the RNG in walker order, so results depend only on the seed.
std::vector<Trajectory> rollout_forward(const Hypergrid& env,
                                        const BatchPolicy& policy,
                                        std::int64_t n, Rng& rng,
                                        double explore = 0.0);

}  // namespace tdgfn
