// Command-line front end for the offline hypergrid training pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric fault,
// 4 degenerate pruning.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tdgfn/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  std::string method;
  std::int64_t iters = -1;
  bool no_prune = false;
  bool dataset_prune = false;
  bool uniform_backward = false;
  bool no_rebalance = false;
};

tdgfn::ExperimentConfig resolve(const CommonOpts& opts) {
  tdgfn::ExperimentConfig cfg = tdgfn::parse_config_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.run.out_dir = opts.out_dir;
  if (!opts.seeds.empty())
    cfg = [&] {
      auto c = cfg;
      c.run.seeds.clear();
      std::stringstream ss(opts.seeds);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) c.run.seeds.push_back(std::stoull(item));
      if (c.run.seeds.empty())
        throw tdgfn::ConfigError("--seeds: empty seed list");
      return c;
    }();
  if (!opts.method.empty()) {
    if (opts.method != "tdgfn" && opts.method != "dataset_gfn" &&
        opts.method != "bc")
      throw tdgfn::ConfigError("--method must be tdgfn, dataset_gfn or bc");
    cfg.train.method = opts.method;
  }
  if (opts.iters >= 0) cfg.train.config.iters = opts.iters;
  if (opts.no_prune) cfg.train.no_prune = true;
  if (opts.dataset_prune) cfg.train.dataset_prune = true;
  if (opts.uniform_backward) cfg.train.uniform_backward = true;
  if (opts.no_rebalance) cfg.train.no_rebalance = true;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool train_flags) {
  cmd->add_option("--config", opts.config_path, "experiment config file")
      ->required();
  cmd->add_option("--out", opts.out_dir, "override run.out_dir");
  if (train_flags) {
    cmd->add_option("--seeds", opts.seeds, "override run.seeds (comma list)");
    cmd->add_option("--method", opts.method, "tdgfn | dataset_gfn | bc");
    cmd->add_option("--iters", opts.iters, "override train.iters");
    cmd->add_flag("--no-prune", opts.no_prune, "skip pruning (keep the full DAG)");
    cmd->add_flag("--dataset-prune", opts.dataset_prune,
                  "keep only dataset-observed edges");
    cmd->add_flag("--uniform-backward", opts.uniform_backward,
                  "uniform parent choice in backward sampling");
    cmd->add_flag("--no-rebalance", opts.no_rebalance,
                  "sample dataset trajectories uniformly during edge-reward "
                  "training");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline GFlowNet training on the hypergrid benchmark"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts, sweep_opts, render_opts;
  std::string eval_checkpoint, eval_pruned, eval_out = "eval.json";
  std::int64_t eval_samples = 10000;
  std::string sweep_ks = "1,3,5,7,9";
  std::string render_edges, render_pruned, render_mode = "heat",
              render_out = "render.svg";
  std::string repro_dir = "configs", repro_name = "all";
  bool repro_long = false;

  add_common(app.add_subcommand("gen-data", "synthesize the dataset"),
             gen_opts, false);
  add_common(app.add_subcommand("train", "run the training pipeline"),
             train_opts, true);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, eval_opts, false);
  eval_cmd->add_option("--checkpoint", eval_checkpoint)->required();
  eval_cmd->add_option("--pruned", eval_pruned,
                       "kept-edge dump when the model was trained on a "
                       "pruned graph");
  eval_cmd->add_option("--samples", eval_samples);
  eval_cmd->add_option("--report", eval_out, "output JSON path");

  auto* sweep_cmd =
      app.add_subcommand("sweep-k", "rerun pruning+training per K");
  add_common(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--k", sweep_ks, "comma list of K values");

  auto* render_cmd = app.add_subcommand("render", "SVG picture of a 2-D grid");
  add_common(render_cmd, render_opts, false);
  render_cmd->add_option("--edge-table", render_edges, "edge-score CSV dump");
  render_cmd->add_option("--pruned", render_pruned, "kept-edge CSV dump");
  render_cmd->add_option("--mode", render_mode, "heat | kept | backward");
  render_cmd->add_option("--svg", render_out, "output SVG path");

  auto* repro_cmd =
      app.add_subcommand("reproduce", "run bundled experiment configs");
  repro_cmd->add_option("--configs", repro_dir, "config directory");
  repro_cmd->add_option("--experiment", repro_name, "name or 'all'");
  repro_cmd->add_flag("--long", repro_long, "include long-running experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("gen-data")) {
      const std::string path = tdgfn::cmd_gen_data(resolve(gen_opts));
      std::cout << "dataset written to " << path << "\n";
    } else if (app.got_subcommand("train")) {
      const auto outputs = tdgfn::cmd_train(resolve(train_opts));
      for (const auto& seed : outputs.seeds)
        std::cout << "seed " << seed.seed << ": " << seed.trace_file << "\n";
      std::cout << "aggregate: " << outputs.aggregate_file << "\n";
    } else if (app.got_subcommand("eval")) {
      const auto report = tdgfn::cmd_eval(resolve(eval_opts), eval_checkpoint,
                                          eval_pruned, eval_samples, eval_out);
      std::cout << tdgfn::eval_report_json(report);
    } else if (app.got_subcommand("sweep-k")) {
      std::vector<double> ks;
      std::stringstream ss(sweep_ks);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) ks.push_back(std::stod(item));
      const auto rows = tdgfn::cmd_sweep_k(resolve(sweep_opts), ks);
      for (const auto& row : rows)
        std::cout << "K=" << row.k
                  << (row.degenerate ? " degenerate"
                                     : " kept=" + std::to_string(row.kept_edges))
                  << "\n";
    } else if (app.got_subcommand("render")) {
      tdgfn::cmd_render(resolve(render_opts), render_edges, render_pruned,
                        render_mode, render_out);
      std::cout << "wrote " << render_out << "\n";
    } else if (app.got_subcommand("reproduce")) {
      const auto names = tdgfn::cmd_reproduce(repro_dir, repro_name, repro_long);
      for (const auto& n : names) std::cout << "completed " << n << "\n";
    }
  } catch (const tdgfn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tdgfn::CapacityError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tdgfn::NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << "\n";
    return 3;
  } catch (const tdgfn::DegeneratePruning& e) {
    std::cerr << "degenerate pruning: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
