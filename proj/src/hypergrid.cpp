#include "tdgfn/hypergrid.hpp"

#include <cmath>
#include <string>

namespace tdgfn {

Hypergrid::Hypergrid(const GridSpec& spec) : spec_(spec) {
  if (spec_.side < 2) throw ConfigError("grid side length must be >= 2");
  if (spec_.ndim < 1) throw ConfigError("grid dimension count must be >= 1");
  if (!(spec_.r0 > 0.0 && spec_.r0 < spec_.r1 && spec_.r1 < spec_.r2))
    throw ConfigError("reward levels must satisfy 0 < R0 < R1 < R2");

  pow_.resize(spec_.ndim);
  std::int64_t n = 1;
  for (int d = 0; d < spec_.ndim; ++d) {
    pow_[d] = n;
    if (n > kMaxInterior / spec_.side)
      throw CapacityError("grid has more than " +
                          std::to_string(kMaxInterior) + " states");
    n *= spec_.side;
  }
  if (n > kMaxInterior)
    throw CapacityError("grid has more than " + std::to_string(kMaxInterior) +
                        " states");
  n_ = n;
}

Eigen::VectorXi Hypergrid::coords_of(StateId s) const {
  Eigen::VectorXi c(spec_.ndim);
  StateId rest = interior_of(s);
  for (int d = 0; d < spec_.ndim; ++d) {
    c[d] = static_cast<int>(rest % spec_.side);
    rest /= spec_.side;
  }
  return c;
}

StateId Hypergrid::id_of(const Eigen::VectorXi& coords, bool terminal) const {
  if (coords.size() != spec_.ndim)
    throw ContractViolation("id_of: coordinate count mismatch");
  StateId id = 0;
  for (int d = 0; d < spec_.ndim; ++d) {
    if (coords[d] < 0 || coords[d] >= spec_.side)
      throw ContractViolation("id_of: coordinate out of range");
    id += pow_[d] * coords[d];
  }
  return terminal ? twin_terminal(id) : id;
}

int Hypergrid::legal_action_count(StateId interior) const {
  int count = 1;  // stop
  for (int d = 0; d < spec_.ndim; ++d)
    if (coord(interior, d) < spec_.side - 1) ++count;
  return count;
}

std::vector<char> Hypergrid::legal_mask(StateId interior) const {
  std::vector<char> mask(spec_.ndim + 1, 0);
  for (int d = 0; d < spec_.ndim; ++d)
    mask[d] = coord(interior, d) < spec_.side - 1;
  mask[spec_.ndim] = 1;
  return mask;
}

std::vector<Edge> Hypergrid::children(StateId s) const {
  std::vector<Edge> out;
  if (terminal(s)) return out;
  out.reserve(spec_.ndim + 1);
  for (int d = 0; d < spec_.ndim; ++d)
    if (coord(s, d) < spec_.side - 1) out.push_back({s, s + pow_[d], d});
  out.push_back({s, twin_terminal(s), spec_.ndim});
  return out;
}

std::vector<Edge> Hypergrid::parents(StateId s) const {
  std::vector<Edge> out;
  if (terminal(s)) {
    out.push_back({twin_interior(s), s, spec_.ndim});
    return out;
  }
  for (int d = 0; d < spec_.ndim; ++d)
    if (coord(s, d) > 0) out.push_back({s - pow_[d], s, d});
  return out;
}

Edge Hypergrid::edge_of_slot(std::int64_t slot) const {
  const StateId from = slot / (spec_.ndim + 1);
  const int action = static_cast<int>(slot % (spec_.ndim + 1));
  if (!action_legal(from, action))
    throw ContractViolation("edge_of_slot: slot is not a legal edge");
  return {from, apply(from, action), action};
}

std::int64_t Hypergrid::legal_edge_count() const {
  // (side-1)*side^(ndim-1) increments per dimension plus one stop per state.
  const std::int64_t inc = (spec_.side - 1) * (n_ / spec_.side);
  return spec_.ndim * inc + n_;
}

double Hypergrid::reward_value(StateId interior) const {
  bool outer = true;   // every |c/H - 0.5| > 0.25
  bool narrow = true;  // every 0.3 < |c/H - 0.5| < 0.4
  for (int d = 0; d < spec_.ndim; ++d) {
    const double u =
        std::abs(static_cast<double>(coord(interior, d)) / spec_.side - 0.5);
    outer = outer && u > 0.25;
    narrow = narrow && u > 0.3 && u < 0.4;
    if (!outer && !narrow) break;
  }
  double r = spec_.r0;
  if (outer) r += spec_.r1;
  if (narrow) r += spec_.r2;
  return r;
}

double Hypergrid::reward(StateId term) const {
  if (!terminal(term))
    throw ContractViolation("reward: state is not terminal");
  return reward_value(twin_interior(term));
}

bool Hypergrid::mode_band(StateId any) const {
  const StateId interior = interior_of(any);
  for (int d = 0; d < spec_.ndim; ++d) {
    const double u =
        std::abs(static_cast<double>(coord(interior, d)) / spec_.side - 0.5);
    if (!(u > 0.3 && u < 0.4)) return false;
  }
  return true;
}

bool Hypergrid::is_mode(StateId term) const {
  if (!terminal(term))
    throw ContractViolation("is_mode: state is not terminal");
  return mode_band(term);
}

void Hypergrid::write_features(StateId s, double* dst) const {
  const StateId interior = interior_of(s);
  std::fill(dst, dst + feature_dim(), 0.0);
  for (int d = 0; d < spec_.ndim; ++d)
    dst[d * spec_.side + coord(interior, d)] = 1.0;
}

Eigen::VectorXd Hypergrid::features(StateId s) const {
  Eigen::VectorXd f(feature_dim());
  write_features(s, f.data());
  return f;
}

Hypergrid::Target Hypergrid::target_distribution() const {
  Target t;
  t.p.resize(n_);
  for (StateId s = 0; s < n_; ++s) t.p[s] = reward_value(s);
  t.z = t.p.sum();
  t.p /= t.z;
  return t;
}

}  // namespace tdgfn
