#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "tdgfn/dataset.hpp"

using namespace tdgfn;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset three_reward_fixture(const Hypergrid& env) {
  // Terminals at reward levels 0.001, 0.501 and 2.501 on the 8x8 grid.
  auto walk = [&](std::initializer_list<int> target) {
    Trajectory t;
    StateId cur = env.root();
    t.states.push_back(cur);
    Eigen::VectorXi goal(2);
    int i = 0;
    for (int x : target) goal[i++] = x;
    for (int d = 0; d < 2; ++d)
      while (env.coord(cur, d) < goal[d]) {
        cur = env.apply(cur, d);
        t.states.push_back(cur);
      }
    cur = env.apply(cur, env.stop_action());
    t.states.push_back(cur);
    t.terminal_reward = env.reward(cur);
    return t;
  };
  Dataset d;
  d.spec = env.spec();
  d.provenance = "external";
  d.trajectories = {walk({4, 4}), walk({0, 0}), walk({1, 7})};
  return d;
}

}  // namespace

TEST_CASE("generated rollouts are valid trajectories") {
  const Hypergrid env({2, 1, 1e-3, 0.5, 2.0});
  const Dataset d = generate(env, UniformPolicy{}, 4, 99, "random");
  CHECK(d.size() == 4);
  CHECK_NOTHROW(validate_dataset(env, d));
  for (const auto& t : d.trajectories) {
    CHECK(t.states.front() == env.root());
    CHECK(env.terminal(t.states.back()));
    CHECK(t.terminal_reward == env.reward(t.states.back()));
  }
}

TEST_CASE("generation is reproducible") {
  const Hypergrid env({4, 2, 1e-3, 0.5, 2.0});
  const std::string a = temp_path("tdgfn_gen_a.jsonl");
  const std::string b = temp_path("tdgfn_gen_b.jsonl");
  save_dataset(generate(env, UniformPolicy{}, 32, 5, "random"), a);
  save_dataset(generate(env, UniformPolicy{}, 32, 5, "random"), b);
  CHECK(slurp(a) == slurp(b));
  save_dataset(generate(env, UniformPolicy{}, 32, 6, "random"), b);
  CHECK(slurp(a) != slurp(b));
}

TEST_CASE("mix and subsample") {
  const Hypergrid env({4, 2, 1e-3, 0.5, 2.0});
  const Dataset a = generate(env, UniformPolicy{}, 10, 1, "random");
  const Dataset b = generate(env, UniformPolicy{}, 6, 2, "random");
  const Dataset m = mix(a, b);
  CHECK(m.size() == 16);
  CHECK(m.provenance == "mixed");

  const Dataset sub = subsample(m, 5, 3);
  CHECK(sub.size() == 5);
  CHECK_THROWS_AS(subsample(m, 17, 3), ContractViolation);

  // n = |d| permutes: same multiset of terminal states
  const Dataset perm = subsample(m, 16, 4);
  auto key = [](const Dataset& d) {
    std::vector<StateId> t;
    for (const auto& traj : d.trajectories) t.push_back(traj.states.back());
    std::sort(t.begin(), t.end());
    return t;
  };
  CHECK(key(perm) == key(m));

  Dataset other = b;
  other.spec.side = 5;
  CHECK_THROWS_AS(mix(a, other), ConfigError);
}

TEST_CASE("save and load round trip") {
  const Hypergrid env({8, 2, 1e-3, 0.5, 2.0});
  const Dataset d = three_reward_fixture(env);
  const std::string path = temp_path("tdgfn_roundtrip.jsonl");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.trajectories[i].states == d.trajectories[i].states);
    CHECK(back.trajectories[i].terminal_reward ==
          d.trajectories[i].terminal_reward);
  }
  CHECK(back.spec.side == 8);
  CHECK(back.provenance == "external");
}

TEST_CASE("load rejects malformed files with line numbers") {
  const std::string path = temp_path("tdgfn_bad.jsonl");

  SUBCASE("empty file") {
    std::ofstream(path) << "";
    CHECK_THROWS_AS(load_dataset(path), ConfigError);
  }

  SUBCASE("header only") {
    std::ofstream(path)
        << R"({"format":"tdgfn-dataset-v1","H":2,"D":1,"R0":0.001,"R1":0.5,"R2":2.0,"provenance":"x","seed":0,"count":0})"
        << "\n";
    CHECK_THROWS_AS(load_dataset(path), ConfigError);
  }

  SUBCASE("invalid transition names its line") {
    std::ofstream(path)
        << R"({"format":"tdgfn-dataset-v1","H":4,"D":1,"R0":0.001,"R1":0.5,"R2":2.0,"provenance":"x","seed":0,"count":1})"
        << "\n"
        << R"({"coords":[[0],[2],[2]],"terminal":true,"reward":0.5})" << "\n";
    try {
      load_dataset(path);
      FAIL("expected a validation error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }

  SUBCASE("garbage json names its line") {
    std::ofstream(path)
        << R"({"format":"tdgfn-dataset-v1","H":4,"D":1,"R0":0.001,"R1":0.5,"R2":2.0,"provenance":"x","seed":0,"count":1})"
        << "\n"
        << "{not json}\n";
    try {
      load_dataset(path);
      FAIL("expected a parse error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }

  SUBCASE("unknown format tag") {
    std::ofstream(path) << R"({"format":"other"})" << "\n";
    CHECK_THROWS_AS(load_dataset(path), ConfigError);
  }
}

TEST_CASE("rebalanced sampler draws proportionally to reward") {
  const Hypergrid env({8, 2, 1e-3, 0.5, 2.0});

  SUBCASE("two-trajectory weights") {
    Dataset d = three_reward_fixture(env);
    d.trajectories.resize(2);
    d.trajectories[0].terminal_reward = 1.0;
    d.trajectories[1].terminal_reward = 3.0;
    const RebalancedSampler sampler(d);
    CHECK(sampler.probability(0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(sampler.probability(1) == doctest::Approx(0.75).epsilon(1e-15));
  }

  SUBCASE("equal rewards are uniform") {
    Dataset d = three_reward_fixture(env);
    for (auto& t : d.trajectories) t.terminal_reward = 0.7;
    const RebalancedSampler sampler(d);
    for (std::size_t i = 0; i < d.size(); ++i)
      CHECK(sampler.probability(i) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }

  SUBCASE("empirical frequencies within multinomial bounds") {
    const Dataset d = three_reward_fixture(env);
    const RebalancedSampler sampler(d);
    const double total = 0.001 + 0.501 + 2.501;
    const std::array<double, 3> p{0.001 / total, 0.501 / total, 2.501 / total};
    Rng rng(123);
    std::array<std::int64_t, 3> counts{};
    const std::int64_t n = 100000;
    for (std::int64_t i = 0; i < n; ++i) ++counts[sampler.sample_index(rng)];
    for (int i = 0; i < 3; ++i) {
      const double sigma = std::sqrt(n * p[i] * (1 - p[i]));
      CHECK(std::abs(counts[i] - n * p[i]) <= 3.0 * sigma);
    }
  }
}

TEST_CASE("rebalanced sampling is exchangeable under dataset permutation") {
  const Hypergrid env({8, 2, 1e-3, 0.5, 2.0});
  Dataset d = three_reward_fixture(env);
  Dataset permuted = d;
  std::swap(permuted.trajectories[0], permuted.trajectories[2]);

  const double total = 0.001 + 0.501 + 2.501;
  auto chi_square = [&](const Dataset& data, std::uint64_t seed) {
    const RebalancedSampler sampler(data);
    Rng rng(seed);
    std::map<double, std::int64_t> counts;  // keyed by reward level
    const std::int64_t n = 10000;
    for (std::int64_t i = 0; i < n; ++i) {
      const auto idx = sampler.sample_index(rng);
      counts[data.trajectories[idx].terminal_reward] += 1;
    }
    double stat = 0.0;
    for (double r : {0.001, 0.501, 2.501}) {
      const double expect = n * r / total;
      const double diff = counts[r] - expect;
      stat += diff * diff / expect;
    }
    return stat;
  };
  // 0.99 quantile of chi-square with 2 degrees of freedom
  CHECK(chi_square(d, 9) < 9.21);
  CHECK(chi_square(permuted, 10) < 9.21);
}

TEST_CASE("reverse generation keeps terminals and rewards") {
  const Hypergrid env({8, 2, 1e-3, 0.5, 2.0});
  const Dataset source = three_reward_fixture(env);
  for (const char* kind : {"uniform", "rule"}) {
    const Dataset rev = reverse_generate(env, source, kind, 17);
    REQUIRE(rev.size() == source.size());
    CHECK_NOTHROW(validate_dataset(env, rev));
    for (std::size_t i = 0; i < rev.size(); ++i) {
      CHECK(rev.trajectories[i].states.back() ==
            source.trajectories[i].states.back());
      CHECK(rev.trajectories[i].terminal_reward ==
            source.trajectories[i].terminal_reward);
    }
  }
  CHECK_THROWS_AS(reverse_generate(env, source, "bogus", 1), ConfigError);
}
