#include <cmath>
#include <deque>

#include "doctest.h"
#include "tdgfn/pruning.hpp"
#include "tdgfn/rng.hpp"

using namespace tdgfn;

namespace {

EdgeRewardTable constant_table(const Hypergrid& env, double value) {
  EdgeRewardTable t;
  t.values.assign(env.edge_slot_count(), value);
  return t;
}

EdgeRewardTable random_table(const Hypergrid& env, std::uint64_t seed,
                             double scale = 3.0) {
  EdgeRewardTable t = constant_table(env, 0.0);
  Rng rng(seed);
  for (auto& v : t.values) v = (rng.uniform01() * 2.0 - 1.0) * scale;
  // keep the root's stop edge attractive so a terminal always survives
  t.values[env.edge_slot(env.root(), env.stop_action())] = scale * 10;
  return t;
}

EdgeStats fixed_stats(double mean, double stddev) {
  EdgeStats s;
  s.mean = mean;
  s.stddev = stddev;
  s.samples = {mean - stddev, mean + stddev};
  return s;
}

}  // namespace

TEST_CASE("edge statistics along imitation rollouts") {
  const Hypergrid env({2, 1, 1e-3, 0.5, 2.0});

  SUBCASE("constant scores give zero spread") {
    const EdgeStats stats = collect_edge_stats(
        env, UniformPolicy{}, constant_table(env, 1.75), 256, 3);
    CHECK(stats.mean == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(stats.stddev == 0.0);
    CHECK(stats.samples.size() == 256);
  }

  SUBCASE("uniform policy mixes edge values at known rates") {
    // root: increment scores 1, stop scores 0; the forced stop at the far
    // cell scores 1/2. Visit mix: root twice as often as the far cell.
    EdgeRewardTable table = constant_table(env, 0.0);
    table.values[env.edge_slot(env.root(), 0)] = 1.0;
    table.values[env.edge_slot(env.root(), env.stop_action())] = 0.0;
    table.values[env.edge_slot(1, env.stop_action())] = 0.5;
    const EdgeStats stats =
        collect_edge_stats(env, UniformPolicy{}, table, 10000, 5);
    CHECK(std::abs(stats.mean - 0.5) < 0.02);
  }

  SUBCASE("deterministic in the seed") {
    const EdgeRewardTable table = random_table(env, 9);
    const EdgeStats a = collect_edge_stats(env, UniformPolicy{}, table, 64, 11);
    const EdgeStats b = collect_edge_stats(env, UniformPolicy{}, table, 64, 11);
    CHECK(a.samples == b.samples);
  }

  SUBCASE("tiny batches rejected") {
    CHECK_THROWS_AS(collect_edge_stats(env, UniformPolicy{},
                                       constant_table(env, 0.0), 1, 1),
                    ContractViolation);
  }
}

TEST_CASE("zero spread keeps the whole graph") {
  const Hypergrid env({4, 2, 1e-3, 0.5, 2.0});
  const EdgeRewardTable table = constant_table(env, 0.3);
  const EdgeStats stats = collect_edge_stats(env, UniformPolicy{}, table, 64, 1);
  REQUIRE(stats.stddev == 0.0);
  const PrunedGraph g = prune(env, table, stats, 7.0);
  CHECK(g.kept_edge_count() == env.legal_edge_count());
  for (StateId s = 0; s < env.state_count(); ++s) CHECK(g.reachable(s));
}

TEST_CASE("threshold arithmetic") {
  const Hypergrid env({4, 1, 1e-3, 0.5, 2.0});
  EdgeRewardTable table = constant_table(env, 0.0);
  table.values[env.edge_slot(0, 0)] = -6.9;   // kept at mean - 7 std
  table.values[env.edge_slot(1, 0)] = -7.5;   // pruned
  const PrunedGraph g = prune(env, table, fixed_stats(0.0, 1.0), 7.0);
  CHECK(g.keeps(env, 0, 0));
  CHECK_FALSE(g.keeps(env, 1, 0));
}

TEST_CASE("edges past a cut survive the threshold but not reachability") {
  // chain 0 -> 1 -> 2 -> 3; cutting 1->2 must also drop 2->3
  const Hypergrid env({4, 1, 1e-3, 0.5, 2.0});
  EdgeRewardTable table = constant_table(env, 0.0);
  table.values[env.edge_slot(1, 0)] = -100.0;
  table.values[env.edge_slot(2, 0)] = 5.0;
  const PrunedGraph g = prune(env, table, fixed_stats(0.0, 1.0), 7.0);
  CHECK_FALSE(g.keeps(env, 1, 0));
  CHECK_FALSE(g.keeps(env, 2, 0));           // unreachable source
  CHECK_FALSE(g.keeps(env, 2, env.stop_action()));
  CHECK_FALSE(g.reachable(2));
  CHECK_FALSE(g.reachable(3));
  CHECK(g.terminals() ==
        std::vector<StateId>{env.twin_terminal(0), env.twin_terminal(1)});
}

TEST_CASE("pruning away every terminal is a hard error") {
  const Hypergrid env({3, 1, 1e-3, 0.5, 2.0});
  const EdgeRewardTable table = constant_table(env, -100.0);
  CHECK_THROWS_AS(prune(env, table, fixed_stats(0.0, 1.0), 7.0),
                  DegeneratePruning);
  // negative K pushes the cut above every score
  const EdgeRewardTable flat = constant_table(env, 0.0);
  CHECK_THROWS_AS(prune(env, flat, fixed_stats(0.0, 1.0), -1.0),
                  DegeneratePruning);
}

TEST_CASE("keep ratio report") {
  const Hypergrid env({4, 2, 1e-3, 0.5, 2.0});
  Dataset data = generate(env, UniformPolicy{}, 16, 2, "random");

  SUBCASE("full graph gives unit fractions") {
    const PrunedGraph g = PrunedGraph::full(env);
    const KeepRatioReport r = keep_ratio_report(env, g, data);
    CHECK(r.dataset_fraction == 1.0);
    CHECK(r.random_fraction == 1.0);
    CHECK(r.ratio == 1.0);
  }

  SUBCASE("retained dataset edges against retained edges overall") {
    // keep exactly the dataset edges: dataset fraction 1, global below 1
    const PrunedGraph g = prune_to_dataset(env, data);
    const KeepRatioReport r = keep_ratio_report(env, g, data);
    CHECK(r.dataset_fraction == 1.0);
    CHECK(r.random_fraction < 1.0);
    CHECK(r.ratio == doctest::Approx(1.0 / r.random_fraction));
    CHECK(r.ratio > 1.0);
  }
}

TEST_CASE("kept set grows with K") {
  const Hypergrid env({5, 2, 1e-3, 0.5, 2.0});
  const EdgeRewardTable table = random_table(env, 13);
  const EdgeStats stats =
      collect_edge_stats(env, UniformPolicy{}, table, 512, 4);
  PrunedGraph prev = prune(env, table, stats, 0.0);
  std::int64_t prev_threshold_kept = -1;
  for (double k : {0.0, 0.3, 0.6, 1.0, 2.0, 7.0}) {
    const PrunedGraph g = prune(env, table, stats, k);
    // threshold pass alone is monotone
    std::int64_t threshold_kept = 0;
    for (StateId s = 0; s < env.interior_count(); ++s)
      for (int a = 0; a < env.action_count(); ++a)
        if (env.action_legal(s, a) &&
            table.at(env, s, a) >= stats.mean - k * stats.stddev)
          ++threshold_kept;
    CHECK(threshold_kept >= prev_threshold_kept);
    prev_threshold_kept = threshold_kept;
    // final kept sets are nested
    for (StateId s = 0; s < env.interior_count(); ++s)
      for (int a = 0; a < env.action_count(); ++a)
        if (env.action_legal(s, a) && prev.keeps(env, s, a))
          CHECK(g.keeps(env, s, a));
    CHECK(g.kept_edge_count() >= prev.kept_edge_count());
    prev = g;
  }
}

TEST_CASE("reachability soundness certificate") {
  // every reachable state is rediscovered by an independent walk over kept
  // edges, and every kept edge touches reachable states
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const Hypergrid env({8, 2, 1e-3, 0.5, 2.0});
    const EdgeRewardTable table = random_table(env, seed, 2.0);
    const EdgeStats stats =
        collect_edge_stats(env, UniformPolicy{}, table, 256, seed);
    const PrunedGraph g = prune(env, table, stats, 1.0);

    std::vector<char> visited(env.state_count(), 0);
    std::deque<StateId> queue{env.root()};
    visited[0] = 1;
    while (!queue.empty()) {
      const StateId s = queue.front();
      queue.pop_front();
      if (env.terminal(s)) continue;
      for (int a = 0; a < env.action_count(); ++a) {
        if (!env.action_legal(s, a) || !g.keeps(env, s, a)) continue;
        const StateId child = env.apply(s, a);
        if (!visited[child]) {
          visited[child] = 1;
          queue.push_back(child);
        }
      }
    }
    for (StateId s = 0; s < env.state_count(); ++s)
      if (g.reachable(s)) CHECK(visited[s] == 1);
    for (StateId s = 0; s < env.interior_count(); ++s)
      for (int a = 0; a < env.action_count(); ++a)
        if (env.action_legal(s, a) && g.keeps(env, s, a)) {
          CHECK(g.reachable(s));
          CHECK(g.reachable(env.apply(s, a)));
        }
    // no reachable interior dead ends: forward sampling cannot strand
    for (StateId s = 0; s < env.interior_count(); ++s) {
      if (!g.reachable(s)) continue;
      bool has_out = false;
      for (int a = 0; a < env.action_count(); ++a)
        has_out = has_out || (env.action_legal(s, a) && g.keeps(env, s, a));
      CHECK(has_out);
    }
  }
}

TEST_CASE("dataset pruning keeps observed transitions reachable") {
  const Hypergrid env({4, 2, 1e-3, 0.5, 2.0});
  const Dataset data = generate(env, UniformPolicy{}, 8, 6, "random");
  const PrunedGraph g = prune_to_dataset(env, data);
  for (const auto& t : data.trajectories) {
    CHECK(g.reachable(t.states.back()));
    for (std::size_t i = 0; i + 1 < t.states.size(); ++i) {
      const StateId from = t.states[i];
      const StateId to = t.states[i + 1];
      for (int a = 0; a < env.action_count(); ++a)
        if (env.action_legal(from, a) && env.apply(from, a) == to)
          CHECK(g.keeps(env, from, a));
    }
  }
  CHECK(g.kept_edge_count() < env.legal_edge_count());
}
