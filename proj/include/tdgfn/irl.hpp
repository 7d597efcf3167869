#pragma once

#include <cstdint>
#include <vector>

#include "tdgfn/dataset.hpp"
#include "tdgfn/nn.hpp"

namespace tdgfn {

// Largest magnitude an edge score can take: the classifier output is kept in
// [1e-6, 1-1e-6] before any logarithm, so scores live in +-log((1-1e-6)/1e-6).
inline constexpr double kClassifierFloor = 1e-6;
double edge_score_clamp();

// Score implied by a classifier output in (0,1): log d - log(1-d), i.e. the
// logit. Inputs are clamped to the floor above first.
double extract_edge_reward(double d);

// Classifier input: from-state one-hot features followed by a one-hot action
// slot (stop last). Length feature_dim + action_count.
int edge_feature_dim(const Hypergrid& env);
void write_edge_features(const Hypergrid& env, StateId from, int action,
                         double* dst);

// Dense per-edge-slot score table; entries for illegal slots are unused.
struct EdgeRewardTable {
  std::vector<double> values;

  double at(const Hypergrid& env, StateId from, int action) const {
    return values[static_cast<std::size_t>(env.edge_slot(from, action))];
  }
};

// Clamped discriminator logits over every legal edge, batched.
EdgeRewardTable tabulate_edge_rewards(const Hypergrid& env, const Mlp& disc);
// Single-edge evaluation (same clamping).
double edge_reward_at(const Hypergrid& env, const Mlp& disc, StateId from,
                      int action);

struct IrlConfig {
  std::int64_t iters = 5000;
  int batch = 16;             // trajectories per iteration
  double actor_lr = 1e-5;
  double disc_lr = 3e-5;
  double entropy_coef = 0.01;
  bool rebalance = true;             // reward-proportional trajectory draws
  bool policy_reward_log_d = false;  // use log D instead of the logit
  bool disc_edges_from_dataset_states = false;  // s from data, s' from policy
};

struct IrlResult {
  Mlp discriminator;
  Mlp policy;
  std::vector<double> disc_loss;  // one value per iteration
};

// Adversarial edge-reward extraction over the (optionally rebalanced)
// dataset. Hidden sizes follow the grid default [256, 256].
IrlResult train_edge_reward(const Hypergrid& env, const Dataset& data,
                            const IrlConfig& config, std::uint64_t seed);

// Binary cross-entropy of the classifier against expert(1)/policy(0) labels;
// fills the parameter gradient when requested.
double discriminator_loss(const Mlp& disc,
                          const Eigen::MatrixXd& expert_features,
                          const Eigen::MatrixXd& policy_features,
                          Eigen::VectorXd* grad);

// Binary cross-entropy step: pushes the classifier toward 1 on dataset edges
// and 0 on policy edges. Returns the loss evaluated after the step.
double discriminator_update(const Hypergrid& env, Mlp& disc, Adam& opt,
                            const Eigen::MatrixXd& expert_features,
                            const Eigen::MatrixXd& policy_features);

// Loss whose analytic gradient is the entropy-regularized policy gradient:
//   -(1/B) sum_i [ A_i * log pi(tau_i) + lambda * sum_t H(pi(.|s_t)) ]
// with the advantages A_i held fixed. Returns the loss; fills grad when set.
double policy_surrogate(const Hypergrid& env, const Mlp& policy,
                        const std::vector<Trajectory>& rollouts,
                        const std::vector<double>& advantages, double lambda,
                        Eigen::VectorXd* grad);

// One policy-gradient ascent step on fresh rollouts: whole-trajectory return
// of per-edge rewards, batch-mean baseline, entropy bonus.
void policy_update(const Hypergrid& env, Mlp& policy, Adam& opt,
                   const std::vector<Trajectory>& rollouts,
                   const std::vector<double>& returns, double lambda);

// Default network shapes.
MlpSpec discriminator_spec(const Hypergrid& env);
MlpSpec policy_spec(const Hypergrid& env);

}  // namespace tdgfn
