#include "tdgfn/pruning.hpp"

#include <cmath>
#include <deque>
#include <unordered_set>

namespace tdgfn {

EdgeStats collect_edge_stats(const Hypergrid& env, const BatchPolicy& policy,
                             const EdgeRewardTable& scores,
                             std::int64_t batch, std::uint64_t seed) {
  if (batch < 2)
    throw ContractViolation("collect_edge_stats: batch must be >= 2");
  EdgeStats stats;
  stats.samples.reserve(batch);
  Rng rng(seed);
  StateId cur = env.root();
  std::vector<StateId> one(1);
  while (static_cast<std::int64_t>(stats.samples.size()) < batch) {
    one[0] = cur;
    const Eigen::MatrixXd probs = policy.action_probs(env, one);
    const auto col = probs.col(0);
    const int action = static_cast<int>(
        rng.categorical({col.data(), static_cast<std::size_t>(col.size())}));
    stats.samples.push_back(scores.at(env, cur, action));
    const StateId child = env.apply(cur, action);
    cur = env.terminal(child) ? env.root() : child;
  }
  double mean = 0.0;
  for (double x : stats.samples) mean += x;
  mean /= stats.samples.size();
  double var = 0.0;
  for (double x : stats.samples) var += (x - mean) * (x - mean);
  var /= stats.samples.size();
  stats.mean = mean;
  stats.stddev = std::sqrt(var);
  return stats;
}

PrunedGraph finalize_pruning(const Hypergrid& env,
                             std::vector<std::uint8_t> kept) {
  const std::int64_t n = env.interior_count();
  const int na = env.action_count();

  // Forward reachability from the root over the candidate kept set.
  std::vector<std::uint8_t> reach(2 * n, 0);
  std::deque<StateId> queue;
  reach[0] = 1;
  queue.push_back(env.root());
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    if (env.terminal(s)) continue;
    for (int a = 0; a < na; ++a) {
      if (!env.action_legal(s, a) || !kept[env.edge_slot(s, a)]) continue;
      const StateId child = env.apply(s, a);
      if (!reach[child]) {
        reach[child] = 1;
        queue.push_back(child);
      }
    }
  }

  std::vector<StateId> terminals;
  for (StateId t = n; t < 2 * n; ++t)
    if (reach[t]) terminals.push_back(t);
  if (terminals.empty())
    throw DegeneratePruning(
        "pruning left no terminal reachable from the root; retry with a "
        "larger threshold coefficient K");

  // Co-reachability: states that can still reach a surviving terminal.
  std::vector<std::uint8_t> co(2 * n, 0);
  for (StateId t : terminals) {
    co[t] = 1;
    queue.push_back(t);
  }
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    for (const Edge& e : env.parents(s)) {
      if (!kept[env.edge_slot(e.from, e.action)]) continue;
      if (!co[e.from]) {
        co[e.from] = 1;
        queue.push_back(e.from);
      }
    }
  }

  PrunedGraph g;
  g.kept_.assign(env.edge_slot_count(), 0);
  g.reachable_.resize(2 * n);
  for (StateId s = 0; s < 2 * n; ++s) g.reachable_[s] = reach[s] && co[s];
  g.kept_edges_ = 0;
  for (StateId s = 0; s < n; ++s) {
    if (!g.reachable_[s]) continue;
    for (int a = 0; a < na; ++a) {
      const std::int64_t slot = env.edge_slot(s, a);
      if (!env.action_legal(s, a) || !kept[slot]) continue;
      if (!co[env.apply(s, a)]) continue;
      g.kept_[slot] = 1;
      ++g.kept_edges_;
    }
  }
  for (StateId t : terminals)
    if (g.reachable_[t]) g.terminals_.push_back(t);
  return g;
}

PrunedGraph PrunedGraph::full(const Hypergrid& env) {
  std::vector<std::uint8_t> kept(env.edge_slot_count(), 0);
  for (StateId s = 0; s < env.interior_count(); ++s)
    for (int a = 0; a < env.action_count(); ++a)
      if (env.action_legal(s, a)) kept[env.edge_slot(s, a)] = 1;
  return finalize_pruning(env, std::move(kept));
}

std::vector<char> PrunedGraph::kept_mask(const Hypergrid& env,
                                         StateId interior) const {
  std::vector<char> mask(env.action_count(), 0);
  for (int a = 0; a < env.action_count(); ++a)
    mask[a] = env.action_legal(interior, a) &&
              kept_[env.edge_slot(interior, a)];
  return mask;
}

std::vector<Edge> PrunedGraph::kept_children(const Hypergrid& env,
                                             StateId s) const {
  std::vector<Edge> out;
  if (env.terminal(s)) return out;
  for (const Edge& e : env.children(s))
    if (kept_[env.edge_slot(e.from, e.action)]) out.push_back(e);
  return out;
}

std::vector<Edge> PrunedGraph::kept_parents(const Hypergrid& env,
                                            StateId s) const {
  std::vector<Edge> out;
  for (const Edge& e : env.parents(s))
    if (kept_[env.edge_slot(e.from, e.action)]) out.push_back(e);
  return out;
}

PrunedGraph prune(const Hypergrid& env, const EdgeRewardTable& scores,
                  const EdgeStats& stats, double k) {
  const double threshold = stats.mean - k * stats.stddev;
  std::vector<std::uint8_t> kept(env.edge_slot_count(), 0);
  for (StateId s = 0; s < env.interior_count(); ++s)
    for (int a = 0; a < env.action_count(); ++a)
      if (env.action_legal(s, a) &&
          scores.at(env, s, a) >= threshold)
        kept[env.edge_slot(s, a)] = 1;
  return finalize_pruning(env, std::move(kept));
}

PrunedGraph prune_to_dataset(const Hypergrid& env, const Dataset& data) {
  std::vector<std::uint8_t> kept(env.edge_slot_count(), 0);
  for (const Trajectory& t : data.trajectories) {
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i) {
      const StateId from = t.states[i];
      const StateId to = t.states[i + 1];
      for (int a = 0; a < env.action_count(); ++a)
        if (env.action_legal(from, a) && env.apply(from, a) == to) {
          kept[env.edge_slot(from, a)] = 1;
          break;
        }
    }
  }
  return finalize_pruning(env, std::move(kept));
}

KeepRatioReport keep_ratio_report(const Hypergrid& env,
                                  const PrunedGraph& graph,
                                  const Dataset& data) {
  std::unordered_set<std::int64_t> seen;
  std::int64_t kept_seen = 0;
  for (const Trajectory& t : data.trajectories) {
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i) {
      const StateId from = t.states[i];
      const StateId to = t.states[i + 1];
      for (int a = 0; a < env.action_count(); ++a) {
        if (!env.action_legal(from, a) || env.apply(from, a) != to) continue;
        const std::int64_t slot = env.edge_slot(from, a);
        if (seen.insert(slot).second && graph.kept_bits()[slot]) ++kept_seen;
        break;
      }
    }
  }
  KeepRatioReport report;
  report.dataset_fraction =
      seen.empty() ? 0.0 : static_cast<double>(kept_seen) / seen.size();
  report.random_fraction = static_cast<double>(graph.kept_edge_count()) /
                           static_cast<double>(env.legal_edge_count());
  report.ratio = report.random_fraction > 0.0
                     ? report.dataset_fraction / report.random_fraction
                     : 0.0;
  return report;
}

}  // namespace tdgfn
