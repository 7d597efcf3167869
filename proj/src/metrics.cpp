#include "tdgfn/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace tdgfn {

double empirical_l1(const Eigen::VectorXd& counts, std::int64_t samples,
                    const Hypergrid::Target& target) {
  if (samples <= 0) throw ContractViolation("empirical_l1: no samples");
  if (counts.size() != target.p.size())
    throw ContractViolation("empirical_l1: size mismatch");
  return (counts / static_cast<double>(samples) - target.p)
             .cwiseAbs()
             .sum() /
         static_cast<double>(target.p.size());
}

double exact_l1(const Eigen::VectorXd& dist, const Hypergrid::Target& target) {
  return (dist - target.p).cwiseAbs().sum() /
         static_cast<double>(target.p.size());
}

double unnormalized_l1(const Eigen::VectorXd& dist,
                       const Hypergrid::Target& target) {
  return (dist - target.p).cwiseAbs().sum();
}

Eigen::MatrixXd policy_probs_all(const Hypergrid& env, const PrunedGraph& graph,
                                 const Mlp& net) {
  const std::int64_t n = env.interior_count();
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(env.action_count(), n);
  const std::int64_t chunk = 8192;
  Eigen::MatrixXd x(env.feature_dim(), std::min(chunk, n));
  for (std::int64_t base = 0; base < n; base += chunk) {
    const std::int64_t count = std::min(chunk, n - base);
    for (std::int64_t i = 0; i < count; ++i)
      env.write_features(base + i, x.col(i).data());
    const Eigen::MatrixXd logits = net.forward(x.leftCols(count));
    for (std::int64_t i = 0; i < count; ++i) {
      const auto mask = graph.kept_mask(env, base + i);
      if (std::find(mask.begin(), mask.end(), char(1)) == mask.end())
        continue;  // dead column; only legal if the state is unreachable
      probs.col(base + i) = softmax_masked(logits.col(i), mask);
    }
  }
  return probs;
}

Eigen::VectorXd dp_terminal_distribution(const Hypergrid& env,
                                         const PrunedGraph& graph,
                                         const Eigen::MatrixXd& probs) {
  const std::int64_t n = env.interior_count();
  Eigen::VectorXd reach = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  reach[0] = 1.0;
  // Ascending interior ids are a topological order.
  for (StateId s = 0; s < n; ++s) {
    const double mass = reach[s];
    if (mass == 0.0) continue;
    for (int a = 0; a < env.action_count(); ++a) {
      if (!env.action_legal(s, a) || !graph.keeps(env, s, a)) continue;
      const double p = probs(a, s);
      if (p == 0.0) continue;
      if (a == env.stop_action())
        out[s] += mass * p;
      else
        reach[env.apply(s, a)] += mass * p;
    }
  }
  const double total = out.sum();
  if (std::abs(total - 1.0) > 1e-10)
    throw NumericFault("dp_terminal_distribution: probability mass leaked (" +
                       std::to_string(total) + ")");
  return out;
}

Eigen::VectorXd sample_counts(const Eigen::VectorXd& dist, std::int64_t n,
                              Rng& rng) {
  std::vector<double> cum(dist.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    total += dist[i];
    cum[i] = total;
  }
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(dist.size());
  for (std::int64_t i = 0; i < n; ++i)
    counts[static_cast<Eigen::Index>(rng.categorical_cum(cum))] += 1.0;
  return counts;
}

double topk_mean(const Hypergrid& env, const std::vector<StateId>& terminals,
                 std::int64_t k) {
  if (k <= 0 || k > static_cast<std::int64_t>(terminals.size()))
    throw ContractViolation("topk_mean: k out of range");
  std::vector<double> rewards;
  rewards.reserve(terminals.size());
  for (StateId t : terminals) rewards.push_back(env.reward(t));
  std::partial_sort(rewards.begin(), rewards.begin() + k, rewards.end(),
                    std::greater<>());
  double sum = 0.0;
  for (std::int64_t i = 0; i < k; ++i) sum += rewards[i];
  return sum / static_cast<double>(k);
}

}  // namespace tdgfn
