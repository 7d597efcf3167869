#include "tdgfn/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "tdgfn/dataset.hpp"

namespace fs = std::filesystem;

namespace tdgfn {

namespace {

std::string seed_file(const ExperimentConfig& cfg, std::uint64_t seed,
                      const std::string& suffix) {
  return cfg.run.out_dir + "/seed" + std::to_string(seed) + "_" + suffix;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

// Edge tables are only dumped for grids where the CSV stays small.
bool dump_tables(const Hypergrid& env) {
  return env.edge_slot_count() <= 200000;
}

// Run one closure per item on a bounded pool, rethrowing the first failure.
void parallel_for(int jobs, std::size_t count,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure || next >= count) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<std::size_t>(jobs, count);
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Dataset build_dataset(const Hypergrid& env, const ExperimentConfig& cfg) {
  const DatasetRecipe& recipe = cfg.dataset;
  auto expert_policy = [&](double reward_exponent, std::int64_t iters,
                           const char* tag) {
    OnlineConfig online = cfg.online;
    online.iters = iters;
    online.reward_exponent = reward_exponent;
    return train_online(env, online, derive_seed(recipe.seed, tag));
  };
  auto generate_with = [&](const BatchPolicy& policy, std::int64_t n,
                           const char* tag, const std::string& provenance) {
    return generate(env, policy, n, derive_seed(recipe.seed, tag), provenance);
  };

  Dataset d;
  if (recipe.kind == "external") {
    if (recipe.path.empty())
      throw ConfigError("dataset.kind = external needs dataset.path");
    d = load_dataset(recipe.path);
    if (d.spec.side != cfg.grid.side || d.spec.ndim != cfg.grid.ndim)
      throw ConfigError("external dataset grid does not match the config");
    return d;
  }
  if (recipe.kind == "random") {
    d = generate_with(UniformPolicy{}, recipe.base_size, "gen-random",
                      "random");
  } else if (recipe.kind == "expert" || recipe.kind == "median" ||
             recipe.kind == "bad") {
    const double exponent = recipe.kind == "bad" ? -0.1 : 1.0;
    const std::int64_t iters =
        recipe.kind == "median" ? cfg.online.iters / 2 : cfg.online.iters;
    const FlowModel behavior = expert_policy(exponent, iters, "behavior");
    NetPolicy policy(&behavior.net());
    d = generate_with(policy, recipe.base_size, "gen", recipe.kind);
  } else if (recipe.kind == "mixed") {
    const FlowModel behavior =
        expert_policy(1.0, cfg.online.iters, "behavior");
    NetPolicy policy(&behavior.net());
    Dataset expert =
        generate_with(policy, recipe.base_size, "gen", "expert");
    Dataset random = generate_with(UniformPolicy{}, recipe.base_size,
                                   "gen-random", "random");
    d = mix(expert, random);
    d.provenance = "mixed";
  } else if (recipe.kind == "reverse_uniform" || recipe.kind == "reverse_rule") {
    if (recipe.source.empty())
      throw ConfigError("reverse dataset kinds need dataset.source");
    const Dataset source = load_dataset(recipe.source);
    d = reverse_generate(env, source,
                         recipe.kind == "reverse_uniform" ? "uniform" : "rule",
                         derive_seed(recipe.seed, "reverse"));
  } else {
    throw ConfigError("unknown dataset kind '" + recipe.kind + "'");
  }

  if (static_cast<std::int64_t>(d.size()) != recipe.size)
    d = subsample(d, recipe.size, derive_seed(recipe.seed, "subsample"));
  d.seed = recipe.seed;
  return d;
}

std::string cmd_gen_data(const ExperimentConfig& cfg) {
  const Hypergrid env(cfg.grid);
  fs::create_directories(cfg.run.out_dir);
  const Dataset d = build_dataset(env, cfg);
  const std::string path = cfg.run.out_dir + "/dataset.jsonl";
  save_dataset(d, path);

  Manifest manifest;
  manifest.config_snapshot = dump_config(cfg);
  manifest.record("dataset", path);
  save_manifest(manifest, cfg.run.out_dir + "/manifest.json");
  return path;
}

PipelineArtifacts run_phase12(const Hypergrid& env, const Dataset& data,
                              const ExperimentConfig& cfg, std::uint64_t seed) {
  PipelineArtifacts art;
  const bool scores_for_backward = !cfg.train.uniform_backward;
  const bool reward_guided_prune =
      !cfg.train.no_prune && !cfg.train.dataset_prune;
  const bool need_irl = scores_for_backward || reward_guided_prune;

  if (need_irl) {
    IrlConfig irl = cfg.irl;
    irl.rebalance = !cfg.train.no_rebalance && cfg.irl.rebalance;
    art.irl = train_edge_reward(env, data, irl, derive_seed(seed, "irl"));
    art.scores = tabulate_edge_rewards(env, art.irl->discriminator);
  }

  if (cfg.train.no_prune) {
    art.graph = PrunedGraph::full(env);
  } else if (cfg.train.dataset_prune) {
    art.graph = prune_to_dataset(env, data);
  } else {
    NetPolicy imitation(&art.irl->policy);
    art.stats = collect_edge_stats(env, imitation, *art.scores,
                                   cfg.prune.stats_batch,
                                   derive_seed(seed, "prune-stats"));
    art.graph = prune(env, *art.scores, *art.stats, cfg.prune.k);
  }
  art.keep_ratio = keep_ratio_report(env, art.graph, data);
  return art;
}

TrainResult run_phase3(const Hypergrid& env, const Dataset& data,
                       const PipelineArtifacts& art,
                       const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.train.method == "tdgfn") {
    const EdgeRewardTable* scores =
        cfg.train.uniform_backward ? nullptr : &*art.scores;
    return train_offline(env, data, art.graph, scores, cfg.train.config, seed,
                         TrajectorySource::backward);
  }
  if (cfg.train.method == "dataset_gfn") {
    const PrunedGraph full = PrunedGraph::full(env);
    return train_offline(env, data, full, nullptr, cfg.train.config, seed,
                         TrajectorySource::dataset_uniform);
  }
  if (cfg.train.method == "bc") {
    BcConfig bc;
    bc.iters = cfg.train.config.iters;
    bc.batch = cfg.train.config.batch;
    bc.lr = cfg.train.config.lr;
    bc.eval_cadence = cfg.train.config.eval_cadence;
    bc.eval_samples = cfg.train.config.eval_samples;
    BcResult r = train_bc(env, data, bc, seed);
    TrainResult out;
    out.model.net() = std::move(r.policy);
    out.trace = std::move(r.trace);
    out.mode_curve = std::move(r.mode_curve);
    return out;
  }
  throw ConfigError("unknown training method '" + cfg.train.method + "'");
}

TrainOutputs cmd_train(const ExperimentConfig& cfg) {
  const Hypergrid env(cfg.grid);
  const std::string manifest_path = cfg.run.out_dir + "/manifest.json";
  const std::string dataset_path = cfg.run.out_dir + "/dataset.jsonl";
  Manifest manifest = load_manifest(manifest_path);
  manifest.require("dataset", dataset_path);
  const Dataset data = load_dataset(dataset_path);

  TrainOutputs outputs;
  outputs.seeds.resize(cfg.run.seeds.size());
  std::vector<std::vector<std::pair<std::string, std::string>>> stage_files(
      cfg.run.seeds.size());

  parallel_for(cfg.run.jobs, cfg.run.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = cfg.run.seeds[i];
    SeedOutputs& out = outputs.seeds[i];
    out.seed = seed;
    auto& files = stage_files[i];
    const std::string tag = "seed" + std::to_string(seed);

    PipelineArtifacts art;
    if (cfg.train.method == "tdgfn") {
      art = run_phase12(env, data, cfg, seed);
      if (art.irl) {
        const std::string disc = seed_file(cfg, seed, "irl_disc.json");
        write_text(disc, art.irl->discriminator.to_json());
        files.emplace_back(tag + "_irl_disc", disc);
        const std::string pol = seed_file(cfg, seed, "irl_policy.json");
        write_text(pol, art.irl->policy.to_json());
        files.emplace_back(tag + "_irl_policy", pol);
        if (art.scores && dump_tables(env)) {
          const std::string redge = seed_file(cfg, seed, "redge.csv");
          dump_edge_table(env, *art.scores, redge);
          files.emplace_back(tag + "_redge", redge);
        }
      }
      if (dump_tables(env)) {
        const std::string pruned = seed_file(cfg, seed, "pruned.csv");
        dump_pruned_graph(env, art.graph, pruned);
        files.emplace_back(tag + "_pruned", pruned);
      }
      nlohmann::json report;
      report["kept_edges"] = art.graph.kept_edge_count();
      report["legal_edges"] = env.legal_edge_count();
      report["surviving_terminals"] = art.graph.terminals().size();
      if (art.stats) {
        report["stats_mean"] = art.stats->mean;
        report["stats_std"] = art.stats->stddev;
        report["threshold"] = art.stats->mean - cfg.prune.k * art.stats->stddev;
      }
      if (art.keep_ratio) {
        report["dataset_fraction"] = art.keep_ratio->dataset_fraction;
        report["random_fraction"] = art.keep_ratio->random_fraction;
        report["ratio"] = art.keep_ratio->ratio;
      }
      write_text(seed_file(cfg, seed, "prune_report.json"),
                 report.dump(2) + "\n");
    } else {
      art.graph = PrunedGraph::full(env);
    }

    TrainResult result = run_phase3(env, data, art, cfg, seed);

    out.trace_file = seed_file(cfg, seed, "trace.csv");
    write_trace(out.trace_file, result.trace);
    files.emplace_back(tag + "_trace", out.trace_file);
    out.model_file = seed_file(cfg, seed, "model.json");
    write_text(out.model_file, result.model.to_json());
    files.emplace_back(tag + "_model", out.model_file);
    out.trace = std::move(result.trace);
    out.mode_curve = std::move(result.mode_curve);
  });

  for (const auto& files : stage_files)
    for (const auto& [stage, file] : files) manifest.record(stage, file);

  std::vector<std::vector<TraceRow>> traces;
  for (const SeedOutputs& s : outputs.seeds) traces.push_back(s.trace);
  outputs.aggregate_file = cfg.run.out_dir + "/aggregate.csv";
  write_aggregate(outputs.aggregate_file, aggregate_traces(traces));
  manifest.record("aggregate", outputs.aggregate_file);
  save_manifest(manifest, manifest_path);
  return outputs;
}

std::vector<KSweepRow> cmd_sweep_k(const ExperimentConfig& cfg,
                                   const std::vector<double>& ks) {
  if (ks.empty()) throw ConfigError("sweep-k: no K values given");
  const Hypergrid env(cfg.grid);
  const std::string manifest_path = cfg.run.out_dir + "/manifest.json";
  Manifest manifest = load_manifest(manifest_path);
  const std::string dataset_path = cfg.run.out_dir + "/dataset.jsonl";
  manifest.require("dataset", dataset_path);
  const Dataset data = load_dataset(dataset_path);
  const std::uint64_t seed = cfg.run.seeds.front();

  // Shared phase-1 artifacts across every K.
  IrlConfig irl = cfg.irl;
  irl.rebalance = !cfg.train.no_rebalance && cfg.irl.rebalance;
  const IrlResult ir = train_edge_reward(env, data, irl, derive_seed(seed, "irl"));
  const EdgeRewardTable scores = tabulate_edge_rewards(env, ir.discriminator);
  NetPolicy imitation(&ir.policy);
  const EdgeStats stats =
      collect_edge_stats(env, imitation, scores, cfg.prune.stats_batch,
                         derive_seed(seed, "prune-stats"));
  const std::string disc = cfg.run.out_dir + "/ksweep_irl_disc.json";
  write_text(disc, ir.discriminator.to_json());
  manifest.record("ksweep_irl_disc", disc);

  std::vector<KSweepRow> rows(ks.size());
  parallel_for(cfg.run.jobs, ks.size(), [&](std::size_t i) {
    KSweepRow& row = rows[i];
    row.k = ks[i];
    try {
      const PrunedGraph graph = prune(env, scores, stats, ks[i]);
      row.kept_edges = graph.kept_edge_count();
      const KeepRatioReport ratio = keep_ratio_report(env, graph, data);
      row.dataset_fraction = ratio.dataset_fraction;
      row.random_fraction = ratio.random_fraction;
      row.ratio = ratio.ratio;
      const TrainResult result =
          train_offline(env, data, graph, &scores, cfg.train.config, seed,
                        TrajectorySource::backward);
      row.final_modes = result.mode_curve.empty()
                            ? 0
                            : result.mode_curve.back().second;
      const int all = 1 << cfg.grid.ndim;
      row.visits_to_all_modes = visits_to_modes(result.mode_curve, all);
      row.final_exact_l1 =
          result.trace.empty() ? 0.0 : result.trace.back().exact_l1;
    } catch (const DegeneratePruning&) {
      row.degenerate = true;
    }
  });

  const std::string path = cfg.run.out_dir + "/ksweep.csv";
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "K,status,kept_edges,dataset_fraction,random_fraction,ratio,"
         "final_modes,visits_to_all_modes,final_exact_l1\n";
  char buf[64];
  for (const KSweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.k);
    out << buf << ',' << (r.degenerate ? "degenerate" : "ok") << ','
        << r.kept_edges << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.dataset_fraction);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.random_fraction);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.ratio);
    out << buf << ',' << r.final_modes << ',' << r.visits_to_all_modes << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.final_exact_l1);
    out << buf << '\n';
  }
  out.close();
  manifest.record("ksweep", path);
  save_manifest(manifest, manifest_path);
  return rows;
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::json j;
  j["empirical_l1"] = report.empirical_l1;
  j["exact_l1"] = report.exact_l1;
  j["unnormalized_l1"] = report.unnormalized_l1;
  j["modes_found"] = report.modes_found;
  j["sample_count"] = report.sample_count;
  auto& topk = j["topk"] = nlohmann::json::object();
  for (const auto& [k, v] : report.topk) topk[std::to_string(k)] = v;
  return j.dump(2) + "\n";
}

EvalReport cmd_eval(const ExperimentConfig& cfg,
                    const std::string& checkpoint_path,
                    const std::string& pruned_csv, std::int64_t samples,
                    const std::string& out_path) {
  const Hypergrid env(cfg.grid);
  const PrunedGraph graph = pruned_csv.empty()
                                ? PrunedGraph::full(env)
                                : load_pruned_graph(env, pruned_csv);

  const std::string text = read_text(checkpoint_path);
  FlowModel model;
  const nlohmann::json j = nlohmann::json::parse(text);
  const std::string format = j.value("format", "");
  if (format == "tdgfn-flow-v1") {
    model = FlowModel::from_json(text);
  } else if (format == "tdgfn-mlp-v1") {
    // A plain policy network samples exactly like a flow model: masked
    // softmax over its outputs.
    model.net() = Mlp::from_json(text);
  } else {
    throw ConfigError(checkpoint_path + ": unknown checkpoint format");
  }
  if (model.net().input_dim() != env.feature_dim())
    throw ConfigError("checkpoint input size does not match the grid");

  const Hypergrid::Target target = env.target_distribution();
  const std::vector<StateId> terminals = forward_sample(
      env, graph, model, samples, derive_seed(cfg.run.seeds.front(), "eval"));

  EvalReport report;
  report.sample_count = samples;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(env.interior_count());
  std::unordered_set<StateId> modes;
  for (StateId t : terminals) {
    counts[env.twin_interior(t)] += 1.0;
    if (env.is_mode(t)) modes.insert(t);
  }
  report.modes_found = static_cast<int>(modes.size());
  report.empirical_l1 = empirical_l1(counts, samples, target);
  const Eigen::VectorXd dist = flow_terminal_distribution(env, graph, model);
  report.exact_l1 = exact_l1(dist, target);
  report.unnormalized_l1 = unnormalized_l1(dist, target);
  for (std::int64_t k : {std::int64_t{10}, std::int64_t{100}})
    if (k <= samples) report.topk[k] = topk_mean(env, terminals, k);

  if (!out_path.empty()) write_text(out_path, eval_report_json(report));
  return report;
}

void cmd_render(const ExperimentConfig& cfg, const std::string& edge_csv,
                const std::string& pruned_csv, const std::string& mode,
                const std::string& out_path) {
  const Hypergrid env(cfg.grid);
  std::optional<EdgeRewardTable> scores;
  if (!edge_csv.empty()) scores = load_edge_table(env, edge_csv);
  std::optional<PrunedGraph> graph;
  if (!pruned_csv.empty()) graph = load_pruned_graph(env, pruned_csv);
  RenderMode rm;
  if (mode == "heat") rm = RenderMode::heat;
  else if (mode == "kept") rm = RenderMode::kept;
  else if (mode == "backward") rm = RenderMode::backward;
  else throw ConfigError("render mode must be heat, kept or backward");
  write_text(out_path, render_svg(env, scores ? &*scores : nullptr,
                                  graph ? &*graph : nullptr, rm));
}

std::vector<std::string> cmd_reproduce(const std::string& configs_dir,
                                       const std::string& name_or_all,
                                       bool include_long) {
  std::vector<std::string> names;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(configs_dir))
    if (entry.path().extension() == ".cfg") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<std::string> executed;
  for (const fs::path& p : paths) {
    const std::string name = p.stem().string();
    if (name_or_all != "all" && name_or_all != name) continue;
    const ExperimentConfig cfg = parse_config_file(p.string());
    if (cfg.run.long_running && !include_long) continue;
    cmd_gen_data(cfg);
    cmd_train(cfg);
    executed.push_back(name);
  }
  if (executed.empty())
    throw ConfigError("no experiment matched '" + name_or_all + "' in " +
                      configs_dir);
  return executed;
}

std::int64_t visits_to_modes(
    const std::vector<std::pair<std::int64_t, int>>& curve, int target) {
  for (const auto& [visits, modes] : curve)
    if (modes >= target) return visits;
  return -1;
}

int modes_at_visits(const std::vector<std::pair<std::int64_t, int>>& curve,
                    std::int64_t visits) {
  int modes = 0;
  for (const auto& [v, m] : curve) {
    if (v > visits) break;
    modes = m;
  }
  return modes;
}

}  // namespace tdgfn
