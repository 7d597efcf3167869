#pragma once

#include <cstdint>
#include <vector>

#include "tdgfn/dataset.hpp"
#include "tdgfn/irl.hpp"
#include "tdgfn/policy.hpp"

namespace tdgfn {

struct PruneConfig {
  double k = 7.0;
  std::int64_t stats_batch = 4096;
};

// Empirical distribution of edge scores along imitation-policy rollouts: one
// sampled action per visited state, rollouts restarted until the batch is
// full. Standard deviation is the population form.
struct EdgeStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> samples;
};

EdgeStats collect_edge_stats(const Hypergrid& env, const BatchPolicy& policy,
                             const EdgeRewardTable& scores,
                             std::int64_t batch, std::uint64_t seed);

// Subgraph after pruning. An edge survives when its score clears the
// threshold, its source is reachable from the root, and its target can still
// reach a surviving terminal; `reachable` marks states on at least one
// root-to-terminal path of the kept subgraph.
class PrunedGraph {
 public:
  static PrunedGraph full(const Hypergrid& env);

  bool keeps(const Hypergrid& env, StateId from, int action) const {
    return kept_[static_cast<std::size_t>(env.edge_slot(from, action))] != 0;
  }
  bool reachable(StateId s) const {
    return reachable_[static_cast<std::size_t>(s)] != 0;
  }
  std::int64_t kept_edge_count() const { return kept_edges_; }

  std::vector<char> kept_mask(const Hypergrid& env, StateId interior) const;
  std::vector<Edge> kept_children(const Hypergrid& env, StateId s) const;
  std::vector<Edge> kept_parents(const Hypergrid& env, StateId s) const;

  // Surviving terminals X', ascending.
  const std::vector<StateId>& terminals() const { return terminals_; }

  const std::vector<std::uint8_t>& kept_bits() const { return kept_; }

  friend PrunedGraph finalize_pruning(const Hypergrid& env,
                                      std::vector<std::uint8_t> kept);

 private:
  std::vector<std::uint8_t> kept_;       // per edge slot
  std::vector<std::uint8_t> reachable_;  // per state id
  std::vector<StateId> terminals_;
  std::int64_t kept_edges_ = 0;
};

// Root-reachability and terminal-coreachability passes over a candidate kept
// set. Throws DegeneratePruning when no terminal survives.
PrunedGraph finalize_pruning(const Hypergrid& env,
                             std::vector<std::uint8_t> kept);

// Threshold rule: drop edges scoring below mean - k * std, then connectivity
// passes. Evaluated on every legal edge of the full DAG.
PrunedGraph prune(const Hypergrid& env, const EdgeRewardTable& scores,
                  const EdgeStats& stats, double k);

// Ablation: keep exactly the transitions observed in the dataset.
PrunedGraph prune_to_dataset(const Hypergrid& env, const Dataset& data);

struct KeepRatioReport {
  double dataset_fraction = 0.0;  // unique dataset edges retained
  double random_fraction = 0.0;   // all legal edges retained
  double ratio = 0.0;
};

// Threshold-tuning diagnostic: retention of recorded transitions relative to
// retention of arbitrary transitions.
KeepRatioReport keep_ratio_report(const Hypergrid& env,
                                  const PrunedGraph& graph,
                                  const Dataset& data);

}  // namespace tdgfn
