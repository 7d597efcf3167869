#pragma once

#include <functional>
#include <span>
#include <unordered_map>

#include "tdgfn/dataset.hpp"
#include "tdgfn/irl.hpp"
#include "tdgfn/metrics.hpp"
#include "tdgfn/pruning.hpp"
#include "tdgfn/trace.hpp"

namespace tdgfn {

// Network over state features whose outputs are per-action log edge flows,
// plus a learned log partition scalar used by the trajectory-balance
// objective. The flow-based policy samples kept children in proportion to
// the flows, i.e. a masked softmax of the log-flow outputs.
class FlowModel {
 public:
  FlowModel() = default;
  FlowModel(const Hypergrid& env, std::uint64_t seed)
      : net_(MlpSpec{{env.feature_dim(), 256, 256, env.action_count()}, 0.01},
             seed) {}

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  double log_z() const { return log_z_; }
  double& log_z() { return log_z_; }

  // net parameters followed by log Z.
  std::int64_t param_count() const { return net_.param_count() + 1; }

  std::string to_json() const;
  static FlowModel from_json(const std::string& text);

 private:
  Mlp net_;
  double log_z_ = 0.0;
};

// Table-backed or network-backed view of log flows, the seam that lets loss
// oracles run on hand-built flows.
using LogFlowFn = std::function<Eigen::VectorXd(StateId)>;
LogFlowFn log_flow_fn(const FlowModel& model, const Hypergrid& env);

struct SampledTrajectory {
  Trajectory traj;
  double log_pb_sum = 0.0;  // backward log-likelihood recorded at sampling
};

// Trajectory construction in reverse: terminals drawn from the surviving
// dataset support proportionally to reward, parents by the edge-score
// softmax over kept incoming edges (uniform when no score table is given).
class BackwardSampler {
 public:
  BackwardSampler(const Hypergrid& env, const PrunedGraph& graph,
                  const EdgeRewardTable* scores, const Dataset& data,
                  bool weight_terminals_by_frequency = false);

  SampledTrajectory sample(Rng& rng) const;

  // Parent edges of a state and their probabilities; test hook.
  std::pair<std::vector<Edge>, Eigen::VectorXd> parent_distribution(
      StateId s) const;

  const std::vector<StateId>& terminal_support() const { return terminals_; }
  Eigen::VectorXd terminal_probs() const;

 private:
  struct ParentDist {
    std::vector<Edge> edges;
    std::vector<double> cum;
    Eigen::VectorXd log_p;
  };
  const ParentDist& parents_of(StateId s) const;

  const Hypergrid& env_;
  const PrunedGraph& graph_;
  const EdgeRewardTable* scores_;
  std::vector<StateId> terminals_;
  std::vector<double> terminal_cum_;
  std::vector<double> terminal_reward_;
  mutable std::unordered_map<StateId, ParentDist> cache_;
};

// Flow-matching residual of one trajectory: for every non-root state on it,
// inflow over kept parents against reward plus outflow over kept children,
// squared; by default compared in log space with an epsilon inside the logs.
double fm_loss_value(const Hypergrid& env, const PrunedGraph& graph,
                     const LogFlowFn& flows, const Trajectory& traj,
                     double eps, bool log_space);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // over net params (+ log Z slot for TB)
};

// Mean flow-matching loss and gradient over a trajectory batch. Gradients
// never touch edge scores; only dataset rewards and graph structure enter.
LossGrad fm_loss_grad(const Hypergrid& env, const PrunedGraph& graph,
                      const FlowModel& model, std::span<const Trajectory> batch,
                      double eps, bool log_space);

// Trajectory-balance residual with the backward log-likelihood frozen at
// sampling time: (log Z + sum log P_F - log_pb_sum - log R)^2.
double tb_loss_value(const Hypergrid& env, const PrunedGraph& graph,
                     const LogFlowFn& flows, double log_z,
                     const Trajectory& traj, double log_pb_sum);

LossGrad tb_loss_grad(const Hypergrid& env, const PrunedGraph& graph,
                      const FlowModel& model,
                      std::span<const SampledTrajectory> batch);

enum class Objective { fm, tb };
enum class TrajectorySource { backward, dataset_uniform };

struct TrainConfig {
  Objective objective = Objective::fm;
  std::int64_t iters = 20000;
  int batch = 16;
  double lr = 1e-5;
  double fm_eps = 1.0;
  bool fm_log_space = true;
  bool terminal_weight_by_frequency = false;
  std::int64_t eval_cadence = 50;
  std::int64_t eval_samples = 10000;
};

struct TrainResult {
  FlowModel model;
  std::vector<TraceRow> trace;
  // (cumulative visits, modes found) after every iteration.
  std::vector<std::pair<std::int64_t, int>> mode_curve;
};

// Offline policy optimization on a (possibly pruned) graph. `scores` drives
// the backward policy; pass nullptr for uniform backward sampling. The
// dataset_uniform source replays stored trajectories unchanged.
TrainResult train_offline(const Hypergrid& env, const Dataset& data,
                          const PrunedGraph& graph,
                          const EdgeRewardTable* scores,
                          const TrainConfig& config, std::uint64_t seed,
                          TrajectorySource source = TrajectorySource::backward);

struct OnlineConfig {
  std::int64_t iters = 6000;
  int batch = 16;
  double lr = 1e-4;
  double explore = 0.05;  // uniform-legal action mixing during rollouts
  double fm_eps = 1.0;
  bool fm_log_space = true;
  double reward_exponent = 1.0;  // training reward R^w; labels stay R
};

// On-policy flow-matching training against the true environment reward on
// the full graph; the behavior-policy factory for dataset synthesis.
FlowModel train_online(const Hypergrid& env, const OnlineConfig& config,
                       std::uint64_t seed);

struct BcConfig {
  std::int64_t iters = 2000;
  int batch = 16;
  double lr = 1e-3;
  std::int64_t eval_cadence = 50;
  std::int64_t eval_samples = 10000;
};

struct BcResult {
  Mlp policy;
  std::vector<TraceRow> trace;
  std::vector<std::pair<std::int64_t, int>> mode_curve;
};

// Behavior cloning: masked-softmax policy fit by cross entropy on dataset
// actions.
BcResult train_bc(const Hypergrid& env, const Dataset& data,
                  const BcConfig& config, std::uint64_t seed);

// Mean cross entropy of dataset actions under a policy; fit diagnostic.
double bc_nll(const Hypergrid& env, const Mlp& policy, const Dataset& data);

// Cross-entropy loss over the decision steps of a trajectory batch, with the
// parameter gradient on request.
double bc_loss(const Hypergrid& env, const Mlp& policy,
               std::span<const Trajectory> batch, Eigen::VectorXd* grad);

// Terminal states of n policy rollouts over the kept graph.
std::vector<StateId> forward_sample(const Hypergrid& env,
                                    const PrunedGraph& graph,
                                    const FlowModel& model, std::int64_t n,
                                    std::uint64_t seed);

// Exact terminal distribution of the flow policy on its graph.
Eigen::VectorXd flow_terminal_distribution(const Hypergrid& env,
                                           const PrunedGraph& graph,
                                           const FlowModel& model);

}  // namespace tdgfn
