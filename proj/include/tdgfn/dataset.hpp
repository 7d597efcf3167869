#pragma once

#include <string>
#include <vector>

#include "tdgfn/policy.hpp"

namespace tdgfn {

// Offline trajectory collection. Trajectories always run root -> terminal
// twin and carry the ground-truth terminal reward, regardless of which
// behavior policy produced them.
struct Dataset {
  GridSpec spec;
  std::string provenance = "external";
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
};

// Throws ConfigError when the trajectory is not a root-to-terminal walk over
// legal edges with a positive finite reward.
void validate_trajectory(const Hypergrid& env, const Trajectory& traj);
void validate_dataset(const Hypergrid& env, const Dataset& d);

Dataset generate(const Hypergrid& env, const BatchPolicy& behavior,
                 std::int64_t n, std::uint64_t seed,
                 const std::string& provenance);

// Concatenation; both datasets must share the grid spec.
Dataset mix(const Dataset& a, const Dataset& b);
// Uniform subsample without replacement; n must not exceed the dataset size.
Dataset subsample(const Dataset& d, std::int64_t n, std::uint64_t seed);

// Rebuild trajectories backwards from the terminal states of `source`:
// "uniform" picks parents uniformly, "rule" decrements the smallest positive
// coordinate first.
Dataset reverse_generate(const Hypergrid& env, const Dataset& source,
                         const std::string& kind, std::uint64_t seed);

// Line format: one JSON header with the grid spec and provenance, then one
// JSON object per trajectory.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Draws trajectory indices with probability proportional to terminal reward.
class RebalancedSampler {
 public:
  explicit RebalancedSampler(const Dataset& d);

  std::size_t sample_index(Rng& rng) const {
    return rng.categorical_cum(cum_);
  }
  double probability(std::size_t i) const;
  std::size_t size() const { return cum_.size(); }

 private:
  std::vector<double> cum_;
};

}  // namespace tdgfn
