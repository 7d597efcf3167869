#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdgfn/gfn.hpp"
#include "tdgfn/hypergrid.hpp"
#include "tdgfn/irl.hpp"
#include "tdgfn/pruning.hpp"

namespace tdgfn {

struct DatasetRecipe {
  std::string kind = "expert";  // expert|median|bad|random|mixed|external|
                                // reverse_uniform|reverse_rule
  std::int64_t size = 1500;
  std::int64_t base_size = 0;  // generation pool before subsampling; 0 = size
  std::uint64_t seed = 7;
  std::string path;    // external dataset file
  std::string source;  // source dataset for reverse kinds
};

struct TrainSection {
  std::string method = "tdgfn";  // tdgfn|dataset_gfn|bc
  TrainConfig config;
  // Ablation switches.
  bool no_prune = false;
  bool dataset_prune = false;
  bool uniform_backward = false;
  bool no_rebalance = false;
};

struct EvalSection {
  std::int64_t samples = 10000;
};

struct RunSection {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out_dir = "out/run";
  int jobs = 1;
  bool long_running = false;  // gate for large-grid experiments
};

struct ExperimentConfig {
  GridSpec grid;
  DatasetRecipe dataset;
  OnlineConfig online;
  IrlConfig irl;
  PruneConfig prune;
  TrainSection train;
  EvalSection eval;
  RunSection run;
};

// Flat key=value sections. Unknown sections or keys are configuration
// errors; '#' starts a comment.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical snapshot of every resolved value, stable across runs.
std::string dump_config(const ExperimentConfig& config);

}  // namespace tdgfn
