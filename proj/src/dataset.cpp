#include "tdgfn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace tdgfn {

void validate_trajectory(const Hypergrid& env, const Trajectory& traj) {
  if (traj.states.size() < 2)
    throw ConfigError("trajectory must contain at least root and terminal");
  if (traj.states.front() != env.root())
    throw ConfigError("trajectory must start at the root state");
  for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
    const StateId from = traj.states[i];
    const StateId to = traj.states[i + 1];
    if (env.terminal(from))
      throw ConfigError("trajectory continues past a terminal state");
    bool ok = false;
    for (int a = 0; a < env.action_count(); ++a)
      if (env.action_legal(from, a) && env.apply(from, a) == to) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("trajectory contains an invalid transition");
  }
  if (!env.terminal(traj.states.back()))
    throw ConfigError("trajectory does not end at a terminal state");
  if (!std::isfinite(traj.terminal_reward) || traj.terminal_reward <= 0.0)
    throw ConfigError("trajectory reward must be finite and positive");
}

void validate_dataset(const Hypergrid& env, const Dataset& d) {
  if (d.trajectories.empty()) throw ConfigError("dataset is empty");
  for (const Trajectory& t : d.trajectories) validate_trajectory(env, t);
}

Dataset generate(const Hypergrid& env, const BatchPolicy& behavior,
                 std::int64_t n, std::uint64_t seed,
                 const std::string& provenance) {
  Rng rng(seed);
  Dataset d;
  d.spec = env.spec();
  d.provenance = provenance;
  d.seed = seed;
  d.trajectories = rollout_forward(env, behavior, n, rng);
  return d;
}

Dataset mix(const Dataset& a, const Dataset& b) {
  if (a.spec.side != b.spec.side || a.spec.ndim != b.spec.ndim)
    throw ConfigError("mix: datasets use different grids");
  Dataset out = a;
  out.provenance = "mixed";
  out.trajectories.insert(out.trajectories.end(), b.trajectories.begin(),
                          b.trajectories.end());
  return out;
}

Dataset subsample(const Dataset& d, std::int64_t n, std::uint64_t seed) {
  if (n <= 0 || n > static_cast<std::int64_t>(d.size()))
    throw ContractViolation("subsample: n out of range");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  Dataset out;
  out.spec = d.spec;
  out.provenance = d.provenance;
  out.seed = seed;
  out.trajectories.reserve(n);
  for (std::int64_t i = 0; i < n; ++i)
    out.trajectories.push_back(d.trajectories[order[i]]);
  return out;
}

Dataset reverse_generate(const Hypergrid& env, const Dataset& source,
                         const std::string& kind, std::uint64_t seed) {
  const bool uniform = kind == "uniform";
  if (!uniform && kind != "rule")
    throw ConfigError("reverse_generate: kind must be uniform or rule");
  Rng rng(seed);
  Dataset out;
  out.spec = env.spec();
  out.provenance = "reverse_" + kind;
  out.seed = seed;
  out.trajectories.reserve(source.size());
  for (const Trajectory& src : source.trajectories) {
    Trajectory traj;
    traj.terminal_reward = src.terminal_reward;
    StateId cur = src.states.back();
    traj.states.push_back(cur);
    cur = env.twin_interior(cur);  // undo the stop step
    traj.states.push_back(cur);
    while (cur != env.root()) {
      int pick = -1;
      if (uniform) {
        int count = 0;
        for (int d = 0; d < env.spec().ndim; ++d)
          if (env.coord(cur, d) > 0) ++count;
        int k = static_cast<int>(rng.below(count));
        for (int d = 0; d < env.spec().ndim; ++d) {
          if (env.coord(cur, d) > 0 && k-- == 0) {
            pick = d;
            break;
          }
        }
      } else {
        int best = env.spec().side;
        for (int d = 0; d < env.spec().ndim; ++d) {
          const int c = env.coord(cur, d);
          if (c > 0 && c < best) {
            best = c;
            pick = d;
          }
        }
      }
      Eigen::VectorXi c = env.coords_of(cur);
      c[pick] -= 1;
      cur = env.id_of(c, false);
      traj.states.push_back(cur);
    }
    std::reverse(traj.states.begin(), traj.states.end());
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

void save_dataset(const Dataset& d, const std::string& path) {
  const Hypergrid env(d.spec);
  validate_dataset(env, d);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  nlohmann::json header;
  header["format"] = "tdgfn-dataset-v1";
  header["H"] = d.spec.side;
  header["D"] = d.spec.ndim;
  header["R0"] = d.spec.r0;
  header["R1"] = d.spec.r1;
  header["R2"] = d.spec.r2;
  header["provenance"] = d.provenance;
  header["seed"] = d.seed;
  header["count"] = d.trajectories.size();
  out << header.dump() << "\n";
  for (const Trajectory& t : d.trajectories) {
    nlohmann::json record;
    auto& coords = record["coords"] = nlohmann::json::array();
    for (StateId s : t.states) {
      const Eigen::VectorXi c = env.coords_of(s);
      coords.push_back(std::vector<int>(c.data(), c.data() + c.size()));
    }
    record["terminal"] = true;
    record["reward"] = t.terminal_reward;
    out << record.dump() << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw ConfigError(path + ":1: missing dataset header");
  Dataset d;
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("format", "") != "tdgfn-dataset-v1")
      throw ConfigError("unknown dataset format tag");
    d.spec.side = header.at("H").get<int>();
    d.spec.ndim = header.at("D").get<int>();
    d.spec.r0 = header.at("R0").get<double>();
    d.spec.r1 = header.at("R1").get<double>();
    d.spec.r2 = header.at("R2").get<double>();
    d.provenance = header.value("provenance", "external");
    d.seed = header.value("seed", std::uint64_t(0));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ":1: bad header: " + e.what());
  }
  const Hypergrid env(d.spec);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Trajectory traj;
    try {
      nlohmann::json record = nlohmann::json::parse(line);
      const auto coords = record.at("coords");
      for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto c = coords[i].get<std::vector<int>>();
        if (static_cast<int>(c.size()) != d.spec.ndim)
          throw ConfigError("coordinate arity mismatch");
        Eigen::VectorXi v =
            Eigen::Map<const Eigen::VectorXi>(c.data(), c.size());
        traj.states.push_back(env.id_of(v, i + 1 == coords.size()));
      }
      traj.terminal_reward = record.at("reward").get<double>();
    } catch (const std::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": bad trajectory record: " + e.what());
    }
    try {
      validate_trajectory(env, traj);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    d.trajectories.push_back(std::move(traj));
  }
  if (d.trajectories.empty())
    throw ConfigError(path + ": dataset contains no trajectories");
  return d;
}

RebalancedSampler::RebalancedSampler(const Dataset& d) {
  if (d.trajectories.empty())
    throw ContractViolation("RebalancedSampler: empty dataset");
  cum_.reserve(d.size());
  double total = 0.0;
  for (const Trajectory& t : d.trajectories) {
    if (!(t.terminal_reward > 0.0))
      throw ContractViolation("RebalancedSampler: non-positive weight");
    total += t.terminal_reward;
    cum_.push_back(total);
  }
}

double RebalancedSampler::probability(std::size_t i) const {
  const double w = i == 0 ? cum_[0] : cum_[i] - cum_[i - 1];
  return w / cum_.back();
}

}  // namespace tdgfn
