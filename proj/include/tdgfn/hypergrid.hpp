#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "tdgfn/errors.hpp"

namespace tdgfn {

using StateId = std::int64_t;

// Grid geometry plus the three reward levels of the multi-modal terminal
// reward. Defaults are the standard hard configuration.
struct GridSpec {
  int side = 8;    // cells per dimension (config key H)
  int ndim = 4;    // number of dimensions (config key D)
  double r0 = 1e-3;
  double r1 = 0.5;
  double r2 = 2.0;
};

// One directed transition. `action` is the dimension being incremented, or
// ndim for the stop transition into the terminal twin.
struct Edge {
  StateId from = 0;
  StateId to = 0;
  int action = 0;
};

// Value form of a state, for file I/O and tests. Hot paths use StateId.
struct State {
  Eigen::VectorXi coords;
  bool terminal = false;
};

// D-dimensional grid DAG. Every coordinate vector exists twice: as an
// interior node (ids [0, n)) that still owns actions, and as its terminal
// twin (ids [n, 2n)) reached by the stop action. Interior ids are mixed-radix
// codes of the coordinates with dimension 0 fastest, so ascending id order is
// already a topological order (every increment raises the id).
class Hypergrid {
 public:
  static constexpr std::int64_t kMaxInterior = 10'000'000;

  explicit Hypergrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  std::int64_t interior_count() const { return n_; }
  std::int64_t state_count() const { return 2 * n_; }
  int action_count() const { return spec_.ndim + 1; }
  int stop_action() const { return spec_.ndim; }

  bool terminal(StateId s) const { return s >= n_; }
  StateId root() const { return 0; }
  StateId twin_terminal(StateId interior) const { return interior + n_; }
  StateId twin_interior(StateId term) const { return term - n_; }
  StateId interior_of(StateId s) const { return s >= n_ ? s - n_ : s; }

  int coord(StateId s, int d) const {
    return static_cast<int>((interior_of(s) / pow_[d]) % spec_.side);
  }
  Eigen::VectorXi coords_of(StateId s) const;
  StateId id_of(const Eigen::VectorXi& coords, bool terminal) const;
  State state_of(StateId s) const { return {coords_of(s), terminal(s)}; }

  bool action_legal(StateId interior, int action) const {
    if (terminal(interior)) return false;
    if (action == spec_.ndim) return true;
    return coord(interior, action) < spec_.side - 1;
  }
  // Child reached by a legal action from an interior state.
  StateId apply(StateId interior, int action) const {
    return action == spec_.ndim ? twin_terminal(interior)
                                : interior + pow_[action];
  }
  int legal_action_count(StateId interior) const;
  std::vector<char> legal_mask(StateId interior) const;

  // Outgoing edges: increments by ascending dimension, then stop.
  // Empty for terminal states.
  std::vector<Edge> children(StateId s) const;
  // Incoming edges: decrements by ascending dimension for interior states
  // (empty at the root), the single stop edge for terminal states.
  std::vector<Edge> parents(StateId s) const;

  // Dense edge addressing: one slot per (interior state, action) pair.
  std::int64_t edge_slot(StateId interior, int action) const {
    return interior * (spec_.ndim + 1) + action;
  }
  std::int64_t edge_slot_count() const { return n_ * (spec_.ndim + 1); }
  bool slot_legal(std::int64_t slot) const {
    return action_legal(slot / (spec_.ndim + 1),
                        static_cast<int>(slot % (spec_.ndim + 1)));
  }
  Edge edge_of_slot(std::int64_t slot) const;
  std::int64_t legal_edge_count() const;

  // Terminal reward. Throws ContractViolation on interior ids.
  double reward(StateId term) const;
  double reward_of_coords(StateId any) const { return reward_value(interior_of(any)); }
  // True when every coordinate sits in the narrow top-reward band.
  bool mode_band(StateId any) const;
  bool is_mode(StateId term) const;

  // One-hot block per dimension, length side*ndim.
  int feature_dim() const { return spec_.side * spec_.ndim; }
  void write_features(StateId s, double* dst) const;
  Eigen::VectorXd features(StateId s) const;

  // Normalized terminal reward distribution p(x) = R(x)/Z, indexed by the
  // terminal's interior twin id.
  struct Target {
    Eigen::VectorXd p;
    double z = 0.0;
  };
  Target target_distribution() const;

 private:
  double reward_value(StateId interior) const;

  GridSpec spec_;
  std::int64_t n_ = 0;
  std::vector<std::int64_t> pow_;
};

}  // namespace tdgfn
