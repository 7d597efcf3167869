#pragma once

#include <map>
#include <unordered_set>

#include "tdgfn/nn.hpp"
#include "tdgfn/policy.hpp"
#include "tdgfn/pruning.hpp"

namespace tdgfn {

// Mean absolute deviation between the empirical terminal distribution and
// p(x) = R(x)/Z, averaged over all terminals (unseen ones count as zero).
double empirical_l1(const Eigen::VectorXd& counts, std::int64_t samples,
                    const Hypergrid::Target& target);
// Same metric for an exact distribution.
double exact_l1(const Eigen::VectorXd& dist, const Hypergrid::Target& target);
// Plain sum |dist - p| without the 1/|X| normalization.
double unnormalized_l1(const Eigen::VectorXd& dist,
                       const Hypergrid::Target& target);

// Masked-softmax action distributions for every interior state (columns),
// restricted to kept edges. States without kept actions get a zero column.
Eigen::MatrixXd policy_probs_all(const Hypergrid& env, const PrunedGraph& graph,
                                 const Mlp& net);

// Exact terminal distribution of a policy by forward dynamic programming
// (reach-probability propagation in topological order). Indexed by the
// terminal's interior twin. Throws NumericFault when probability mass leaks,
// i.e. some reachable state has no action distribution.
Eigen::VectorXd dp_terminal_distribution(const Hypergrid& env,
                                         const PrunedGraph& graph,
                                         const Eigen::MatrixXd& probs);

// Multinomial draw from a terminal distribution, returned as counts.
Eigen::VectorXd sample_counts(const Eigen::VectorXd& dist, std::int64_t n,
                              Rng& rng);

// Distinct top-band coordinate vectors touched by training trajectories,
// counting every state a trajectory visits, plus the raw visit counter.
class ModeTracker {
 public:
  void update(const Hypergrid& env, const Trajectory& traj) {
    for (StateId s : traj.states)
      if (env.mode_band(s)) found_.insert(env.interior_of(s));
    visits_ += static_cast<std::int64_t>(traj.states.size());
  }
  int count() const { return static_cast<int>(found_.size()); }
  std::int64_t visits() const { return visits_; }

 private:
  std::unordered_set<StateId> found_;
  std::int64_t visits_ = 0;
};

// Mean reward of the k best samples. k must not exceed the sample count.
double topk_mean(const Hypergrid& env, const std::vector<StateId>& terminals,
                 std::int64_t k);

struct EvalReport {
  double empirical_l1 = 0.0;
  double exact_l1 = 0.0;
  double unnormalized_l1 = 0.0;
  int modes_found = 0;  // distinct modes among the evaluation samples
  std::map<std::int64_t, double> topk;
  std::int64_t sample_count = 0;
};

}  // namespace tdgfn
