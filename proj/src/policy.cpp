#include "tdgfn/policy.hpp"

namespace tdgfn {

Eigen::MatrixXd UniformPolicy::action_probs(
    const Hypergrid& env, const std::vector<StateId>& states) const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(env.action_count(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto mask = env.legal_mask(states[i]);
    const double u = 1.0 / env.legal_action_count(states[i]);
    for (int a = 0; a < env.action_count(); ++a)
      if (mask[a]) p(a, i) = u;
  }
  return p;
}

Eigen::MatrixXd NetPolicy::action_probs(
    const Hypergrid& env, const std::vector<StateId>& states) const {
  Eigen::MatrixXd x(env.feature_dim(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    env.write_features(states[i], x.col(i).data());
  const Eigen::MatrixXd logits = net_->forward(x);
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto mask =
        mask_ ? mask_(env, states[i]) : env.legal_mask(states[i]);
    p.col(i) = softmax_masked(logits.col(i), mask);
  }
  return p;
}

std::vector<Trajectory> rollout_forward(const Hypergrid& env,
                                        const BatchPolicy& policy,
                                        std::int64_t n, Rng& rng,
                                        double explore) {
  std::vector<Trajectory> out(n);
  const std::int64_t chunk = 256;
  for (std::int64_t base = 0; base < n; base += chunk) {
    const std::int64_t count = std::min(chunk, n - base);
    std::vector<std::int64_t> active(count);
    std::vector<StateId> cur(count, env.root());
    for (std::int64_t i = 0; i < count; ++i) {
      active[i] = base + i;
      out[base + i].states.push_back(env.root());
    }
    while (!active.empty()) {
      const Eigen::MatrixXd probs = policy.action_probs(env, cur);
      std::vector<std::int64_t> next_active;
      std::vector<StateId> next_cur;
      for (std::size_t i = 0; i < active.size(); ++i) {
        int action;
        if (explore > 0.0 && rng.uniform01() < explore) {
          const auto mask = env.legal_mask(cur[i]);
          const int pick = static_cast<int>(
              rng.below(env.legal_action_count(cur[i])));
          int seen = -1;
          action = env.stop_action();
          for (int a = 0; a < env.action_count(); ++a) {
            if (!mask[a]) continue;
            if (++seen == pick) {
              action = a;
              break;
            }
          }
        } else {
          const auto col = probs.col(i);
          action = static_cast<int>(
              rng.categorical({col.data(), static_cast<std::size_t>(col.size())}));
        }
        const StateId child = env.apply(cur[i], action);
        Trajectory& traj = out[active[i]];
        traj.states.push_back(child);
        if (env.terminal(child)) {
          traj.terminal_reward = env.reward(child);
        } else {
          next_active.push_back(active[i]);
          next_cur.push_back(child);
        }
      }
      active = std::move(next_active);
      cur = std::move(next_cur);
    }
  }
  return out;
}

}  // namespace tdgfn
