#include "tdgfn/irl.hpp"

#include <cmath>

namespace tdgfn {

double edge_score_clamp() {
  return std::log((1.0 - kClassifierFloor) / kClassifierFloor);
}

double extract_edge_reward(double d) {
  d = std::min(1.0 - kClassifierFloor, std::max(kClassifierFloor, d));
  return std::log(d) - std::log1p(-d);
}

int edge_feature_dim(const Hypergrid& env) {
  return env.feature_dim() + env.action_count();
}

void write_edge_features(const Hypergrid& env, StateId from, int action,
                         double* dst) {
  env.write_features(from, dst);
  double* a = dst + env.feature_dim();
  std::fill(a, a + env.action_count(), 0.0);
  a[action] = 1.0;
}

MlpSpec discriminator_spec(const Hypergrid& env) {
  return {{edge_feature_dim(env), 256, 256, 1}, 0.01};
}

MlpSpec policy_spec(const Hypergrid& env) {
  return {{env.feature_dim(), 256, 256, env.action_count()}, 0.01};
}

namespace {

double clamp_logit(double logit) {
  const double cap = edge_score_clamp();
  return std::min(cap, std::max(-cap, logit));
}

Eigen::MatrixXd edge_features(const Hypergrid& env,
                              const std::vector<Edge>& edges) {
  Eigen::MatrixXd x(edge_feature_dim(env), edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i)
    write_edge_features(env, edges[i].from, edges[i].action, x.col(i).data());
  return x;
}

std::vector<Edge> trajectory_edges(const std::vector<Trajectory>& trajs,
                                   const Hypergrid& env) {
  std::vector<Edge> edges;
  for (const Trajectory& t : trajs) {
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i) {
      const StateId from = t.states[i];
      const StateId to = t.states[i + 1];
      const int action =
          env.terminal(to) ? env.stop_action()
                           : [&] {
                               for (int d = 0; d < env.spec().ndim; ++d)
                                 if (env.coord(to, d) != env.coord(from, d))
                                   return d;
                               return env.stop_action();
                             }();
      edges.push_back({from, to, action});
    }
  }
  return edges;
}

}  // namespace

EdgeRewardTable tabulate_edge_rewards(const Hypergrid& env, const Mlp& disc) {
  EdgeRewardTable table;
  table.values.assign(env.edge_slot_count(), 0.0);
  const std::int64_t chunk = 8192;
  std::vector<std::int64_t> slots;
  slots.reserve(chunk);
  std::vector<Edge> edges;
  edges.reserve(chunk);
  auto flush = [&] {
    if (edges.empty()) return;
    const Eigen::MatrixXd logits = disc.forward(edge_features(env, edges));
    for (std::size_t i = 0; i < edges.size(); ++i)
      table.values[slots[i]] = clamp_logit(logits(0, i));
    slots.clear();
    edges.clear();
  };
  for (StateId s = 0; s < env.interior_count(); ++s) {
    for (int a = 0; a < env.action_count(); ++a) {
      if (!env.action_legal(s, a)) continue;
      slots.push_back(env.edge_slot(s, a));
      edges.push_back({s, env.apply(s, a), a});
      if (static_cast<std::int64_t>(edges.size()) == chunk) flush();
    }
  }
  flush();
  return table;
}

double edge_reward_at(const Hypergrid& env, const Mlp& disc, StateId from,
                      int action) {
  Eigen::VectorXd x(edge_feature_dim(env));
  write_edge_features(env, from, action, x.data());
  return clamp_logit(disc.forward1(x)(0));
}

double discriminator_loss(const Mlp& disc,
                          const Eigen::MatrixXd& expert_features,
                          const Eigen::MatrixXd& policy_features,
                          Eigen::VectorXd* grad) {
  if (expert_features.cols() == 0 || policy_features.cols() == 0)
    throw ContractViolation("discriminator_loss: empty batch");
  Mlp::Cache cache_e, cache_p;
  const Eigen::MatrixXd logit_e = disc.forward(expert_features, cache_e);
  const Eigen::MatrixXd logit_p = disc.forward(policy_features, cache_p);
  // -mean log sigma(l_e) - mean log(1 - sigma(l_p)), in softplus form.
  auto softplus = [](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  };
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logit_e.cols(); ++i)
    loss += softplus(-logit_e(0, i)) / logit_e.cols();
  for (Eigen::Index i = 0; i < logit_p.cols(); ++i)
    loss += softplus(logit_p(0, i)) / logit_p.cols();
  if (grad) {
    // dL/dl = -(1-sigma)/Ne on expert edges, +sigma/Np on policy edges.
    Eigen::MatrixXd ge(1, logit_e.cols()), gp(1, logit_p.cols());
    for (Eigen::Index i = 0; i < logit_e.cols(); ++i)
      ge(0, i) = -1.0 / (1.0 + std::exp(logit_e(0, i))) / logit_e.cols();
    for (Eigen::Index i = 0; i < logit_p.cols(); ++i)
      gp(0, i) = 1.0 / (1.0 + std::exp(-logit_p(0, i))) / logit_p.cols();
    *grad = disc.backward(cache_e, ge) + disc.backward(cache_p, gp);
  }
  return loss;
}

double discriminator_update(const Hypergrid& env, Mlp& disc, Adam& opt,
                            const Eigen::MatrixXd& expert_features,
                            const Eigen::MatrixXd& policy_features) {
  (void)env;
  Eigen::VectorXd grad;
  discriminator_loss(disc, expert_features, policy_features, &grad);
  if (!std::isfinite(grad.sum()))
    throw NumericFault("discriminator_update: non-finite loss gradient");
  opt.update(disc.params(), grad);
  return discriminator_loss(disc, expert_features, policy_features, nullptr);
}

double policy_surrogate(const Hypergrid& env, const Mlp& policy,
                        const std::vector<Trajectory>& rollouts,
                        const std::vector<double>& advantages, double lambda,
                        Eigen::VectorXd* grad) {
  if (rollouts.size() != advantages.size())
    throw ContractViolation("policy_surrogate: advantage count mismatch");
  // Gather every decision step (terminal states own no actions).
  std::vector<StateId> states;
  std::vector<int> actions;
  std::vector<double> adv;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const auto& s = rollouts[i].states;
    for (std::size_t t = 0; t + 1 < s.size(); ++t) {
      const StateId from = s[t];
      const StateId to = s[t + 1];
      int action = env.stop_action();
      if (!env.terminal(to))
        for (int d = 0; d < env.spec().ndim; ++d)
          if (env.coord(to, d) != env.coord(from, d)) {
            action = d;
            break;
          }
      states.push_back(from);
      actions.push_back(action);
      adv.push_back(advantages[i]);
    }
  }
  const double inv_b = 1.0 / static_cast<double>(rollouts.size());

  Eigen::MatrixXd x(env.feature_dim(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    env.write_features(states[i], x.col(i).data());
  Mlp::Cache cache;
  const Eigen::MatrixXd logits = policy.forward(x, cache);

  double loss = 0.0;
  Eigen::MatrixXd out_grad;
  if (grad) out_grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto mask = env.legal_mask(states[i]);
    const Eigen::VectorXd p = softmax_masked(logits.col(i), mask);
    const double h = entropy(p);
    loss -= inv_b * (adv[i] * std::log(p[actions[i]]) + lambda * h);
    if (!grad) continue;
    for (int a = 0; a < env.action_count(); ++a) {
      if (!mask[a]) continue;
      const double dlogpi = (a == actions[i] ? 1.0 : 0.0) - p[a];
      const double dh = -p[a] * (std::log(p[a]) + h);
      out_grad(a, i) = -inv_b * (adv[i] * dlogpi + lambda * dh);
    }
  }
  if (grad) *grad = policy.backward(cache, out_grad);
  return loss;
}

void policy_update(const Hypergrid& env, Mlp& policy, Adam& opt,
                   const std::vector<Trajectory>& rollouts,
                   const std::vector<double>& returns, double lambda) {
  double mean = 0.0;
  for (double g : returns) mean += g / returns.size();
  std::vector<double> adv(returns.size());
  for (std::size_t i = 0; i < returns.size(); ++i) adv[i] = returns[i] - mean;
  for (double a : adv)
    if (!std::isfinite(a))
      throw NumericFault("policy_update: non-finite advantage");
  Eigen::VectorXd grad;
  policy_surrogate(env, policy, rollouts, adv, lambda, &grad);
  opt.update(policy.params(), grad);
}

IrlResult train_edge_reward(const Hypergrid& env, const Dataset& data,
                            const IrlConfig& config, std::uint64_t seed) {
  validate_dataset(env, data);
  IrlResult result{Mlp(discriminator_spec(env), derive_seed(seed, "disc")),
                   Mlp(policy_spec(env), derive_seed(seed, "policy")),
                   {}};
  Adam disc_opt(config.disc_lr, result.discriminator.param_count());
  Adam policy_opt(config.actor_lr, result.policy.param_count());
  RebalancedSampler sampler(data);
  Rng rng(derive_seed(seed, "irl-loop"));
  NetPolicy actor(&result.policy);
  result.disc_loss.reserve(config.iters);

  for (std::int64_t iter = 0; iter < config.iters; ++iter) {
    try {
      // Trajectory minibatch from the (re)balanced dataset.
      std::vector<Trajectory> expert;
      expert.reserve(config.batch);
      for (int j = 0; j < config.batch; ++j) {
        const std::size_t idx =
            config.rebalance
                ? sampler.sample_index(rng)
                : static_cast<std::size_t>(rng.below(data.size()));
        expert.push_back(data.trajectories[idx]);
      }
      const std::vector<Edge> expert_edges = trajectory_edges(expert, env);

      // Opponent edges under the current imitation policy.
      std::vector<Trajectory> rollouts =
          rollout_forward(env, actor, config.batch, rng);
      std::vector<Edge> policy_edges;
      if (config.disc_edges_from_dataset_states) {
        // Dataset-state-conditioned variant: s from the minibatch, one
        // policy action each.
        std::vector<StateId> from;
        for (const Edge& e : expert_edges) from.push_back(e.from);
        const Eigen::MatrixXd probs = actor.action_probs(env, from);
        for (std::size_t i = 0; i < from.size(); ++i) {
          const auto col = probs.col(i);
          const int a = static_cast<int>(rng.categorical(
              {col.data(), static_cast<std::size_t>(col.size())}));
          policy_edges.push_back({from[i], env.apply(from[i], a), a});
        }
      } else {
        policy_edges = trajectory_edges(rollouts, env);
      }

      result.disc_loss.push_back(discriminator_update(
          env, result.discriminator, disc_opt, edge_features(env, expert_edges),
          edge_features(env, policy_edges)));

      // Per-edge rewards of the fresh rollouts under the updated classifier.
      const std::vector<Edge> rollout_edges = trajectory_edges(rollouts, env);
      const Eigen::MatrixXd logits =
          result.discriminator.forward(edge_features(env, rollout_edges));
      std::vector<double> returns(rollouts.size(), 0.0);
      std::size_t cursor = 0;
      for (std::size_t i = 0; i < rollouts.size(); ++i) {
        const std::size_t steps = rollouts[i].states.size() - 1;
        for (std::size_t t = 0; t < steps; ++t) {
          const double logit = clamp_logit(logits(0, cursor++));
          returns[i] += config.policy_reward_log_d
                            ? -std::log1p(std::exp(-logit))  // log sigma
                            : logit;
        }
      }
      policy_update(env, result.policy, policy_opt, rollouts, returns,
                    config.entropy_coef);
    } catch (const NumericFault& e) {
      throw NumericFault("edge-reward iteration " + std::to_string(iter) +
                         ": " + e.what());
    }
  }
  return result;
}

}  // namespace tdgfn
