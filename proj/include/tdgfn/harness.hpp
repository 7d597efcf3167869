#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tdgfn/config.hpp"
#include "tdgfn/manifest.hpp"
#include "tdgfn/metrics.hpp"
#include "tdgfn/render.hpp"

namespace tdgfn {

// Dataset synthesis for every recipe kind. Behavior policies come from the
// in-repo online trainer (expert at full budget, median at half, bad against
// the inverted reward); random uses the uniform policy.
Dataset build_dataset(const Hypergrid& env, const ExperimentConfig& config);

// Writes dataset.jsonl and manifest.json under run.out_dir; returns the
// dataset path.
std::string cmd_gen_data(const ExperimentConfig& config);

// Phase 1 and 2 artifacts of one seed.
struct PipelineArtifacts {
  std::optional<IrlResult> irl;
  std::optional<EdgeRewardTable> scores;
  std::optional<EdgeStats> stats;
  PrunedGraph graph;
  std::optional<KeepRatioReport> keep_ratio;
};

PipelineArtifacts run_phase12(const Hypergrid& env, const Dataset& data,
                              const ExperimentConfig& config,
                              std::uint64_t seed);

// Phase 3 for the configured method over prepared artifacts.
TrainResult run_phase3(const Hypergrid& env, const Dataset& data,
                       const PipelineArtifacts& artifacts,
                       const ExperimentConfig& config, std::uint64_t seed);

struct SeedOutputs {
  std::uint64_t seed = 0;
  std::string trace_file;
  std::string model_file;
  std::vector<TraceRow> trace;
  std::vector<std::pair<std::int64_t, int>> mode_curve;
};

struct TrainOutputs {
  std::vector<SeedOutputs> seeds;
  std::string aggregate_file;
};

// Full per-seed pipeline (phases 1-3) with stage artifacts, traces and the
// cross-seed aggregate. Requires a prior gen-data manifest; refuses to run
// when the dataset no longer matches its recorded hash.
TrainOutputs cmd_train(const ExperimentConfig& config);

struct KSweepRow {
  double k = 0.0;
  bool degenerate = false;
  std::int64_t kept_edges = 0;
  double dataset_fraction = 0.0;
  double random_fraction = 0.0;
  double ratio = 0.0;
  int final_modes = 0;
  std::int64_t visits_to_all_modes = -1;
  double final_exact_l1 = 0.0;
};

// Shares one phase-1 run across every K; per-K degenerate prunings are
// reported in their row instead of aborting the sweep.
std::vector<KSweepRow> cmd_sweep_k(const ExperimentConfig& config,
                                   const std::vector<double>& ks);

// Samples a checkpoint (flow model or plain policy network) on its graph and
// reports the evaluation metrics; optionally writes them as JSON.
EvalReport cmd_eval(const ExperimentConfig& config,
                    const std::string& checkpoint_path,
                    const std::string& pruned_csv, std::int64_t samples,
                    const std::string& out_path);

std::string eval_report_json(const EvalReport& report);

void cmd_render(const ExperimentConfig& config, const std::string& edge_csv,
                const std::string& pruned_csv, const std::string& mode,
                const std::string& out_path);

// Runs gen-data + train for bundled experiment configs. Returns the names
// executed. Experiments with run.long = true only run when include_long.
std::vector<std::string> cmd_reproduce(const std::string& configs_dir,
                                       const std::string& name_or_all,
                                       bool include_long);

// First visit count at which a mode curve reaches `target` modes; -1 when it
// never does.
std::int64_t visits_to_modes(
    const std::vector<std::pair<std::int64_t, int>>& curve, int target);
// Modes reached by the curve at or before a visit budget.
int modes_at_visits(const std::vector<std::pair<std::int64_t, int>>& curve,
                    std::int64_t visits);

}  // namespace tdgfn
