#include "tdgfn/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tdgfn {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

std::int64_t parse_int(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const std::int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError(where + ": expected a number, got '" + v + "'");
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& v,
                                           const std::string& where) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    seeds.push_back(
        static_cast<std::uint64_t>(parse_int(item, where)));
  }
  if (seeds.empty()) throw ConfigError(where + ": seed list is empty");
  return seeds;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
  ExperimentConfig cfg;
  std::stringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "grid" && section != "dataset" && section != "online" &&
          section != "irl" && section != "prune" && section != "train" &&
          section != "eval" && section != "run")
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError(where + ": key outside of any section");

    if (section == "grid") {
      if (key == "H") cfg.grid.side = static_cast<int>(parse_int(value, where));
      else if (key == "D") cfg.grid.ndim = static_cast<int>(parse_int(value, where));
      else if (key == "R0") cfg.grid.r0 = parse_double(value, where);
      else if (key == "R1") cfg.grid.r1 = parse_double(value, where);
      else if (key == "R2") cfg.grid.r2 = parse_double(value, where);
      else throw ConfigError(where + ": unknown grid key '" + key + "'");
    } else if (section == "dataset") {
      if (key == "kind") cfg.dataset.kind = value;
      else if (key == "size") cfg.dataset.size = parse_int(value, where);
      else if (key == "base_size") cfg.dataset.base_size = parse_int(value, where);
      else if (key == "seed") cfg.dataset.seed = static_cast<std::uint64_t>(parse_int(value, where));
      else if (key == "path") cfg.dataset.path = value;
      else if (key == "source") cfg.dataset.source = value;
      else throw ConfigError(where + ": unknown dataset key '" + key + "'");
    } else if (section == "online") {
      if (key == "iters") cfg.online.iters = parse_int(value, where);
      else if (key == "batch") cfg.online.batch = static_cast<int>(parse_int(value, where));
      else if (key == "lr") cfg.online.lr = parse_double(value, where);
      else if (key == "explore") cfg.online.explore = parse_double(value, where);
      else if (key == "fm_eps") cfg.online.fm_eps = parse_double(value, where);
      else if (key == "fm_log_space") cfg.online.fm_log_space = parse_bool(value, where);
      else throw ConfigError(where + ": unknown online key '" + key + "'");
    } else if (section == "irl") {
      if (key == "iters") cfg.irl.iters = parse_int(value, where);
      else if (key == "batch") cfg.irl.batch = static_cast<int>(parse_int(value, where));
      else if (key == "actor_lr") cfg.irl.actor_lr = parse_double(value, where);
      else if (key == "disc_lr") cfg.irl.disc_lr = parse_double(value, where);
      else if (key == "entropy") cfg.irl.entropy_coef = parse_double(value, where);
      else if (key == "policy_reward") {
        if (value == "logit") cfg.irl.policy_reward_log_d = false;
        else if (value == "logd") cfg.irl.policy_reward_log_d = true;
        else throw ConfigError(where + ": policy_reward must be logit or logd");
      } else if (key == "dataset_state_edges")
        cfg.irl.disc_edges_from_dataset_states = parse_bool(value, where);
      else throw ConfigError(where + ": unknown irl key '" + key + "'");
    } else if (section == "prune") {
      if (key == "K") cfg.prune.k = parse_double(value, where);
      else if (key == "stats_batch") cfg.prune.stats_batch = parse_int(value, where);
      else throw ConfigError(where + ": unknown prune key '" + key + "'");
    } else if (section == "train") {
      if (key == "method") {
        if (value != "tdgfn" && value != "dataset_gfn" && value != "bc")
          throw ConfigError(where + ": method must be tdgfn, dataset_gfn or bc");
        cfg.train.method = value;
      } else if (key == "objective") {
        if (value == "fm") cfg.train.config.objective = Objective::fm;
        else if (value == "tb") cfg.train.config.objective = Objective::tb;
        else throw ConfigError(where + ": objective must be fm or tb");
      }
      else if (key == "iters") cfg.train.config.iters = parse_int(value, where);
      else if (key == "batch") cfg.train.config.batch = static_cast<int>(parse_int(value, where));
      else if (key == "lr") cfg.train.config.lr = parse_double(value, where);
      else if (key == "fm_eps") cfg.train.config.fm_eps = parse_double(value, where);
      else if (key == "fm_log_space") cfg.train.config.fm_log_space = parse_bool(value, where);
      else if (key == "eval_cadence") cfg.train.config.eval_cadence = parse_int(value, where);
      else if (key == "eval_samples") cfg.train.config.eval_samples = parse_int(value, where);
      else if (key == "terminal_frequency_weighting")
        cfg.train.config.terminal_weight_by_frequency = parse_bool(value, where);
      else if (key == "no_prune") cfg.train.no_prune = parse_bool(value, where);
      else if (key == "dataset_prune") cfg.train.dataset_prune = parse_bool(value, where);
      else if (key == "uniform_backward") cfg.train.uniform_backward = parse_bool(value, where);
      else if (key == "no_rebalance") cfg.train.no_rebalance = parse_bool(value, where);
      else throw ConfigError(where + ": unknown train key '" + key + "'");
    } else if (section == "eval") {
      if (key == "samples") cfg.eval.samples = parse_int(value, where);
      else throw ConfigError(where + ": unknown eval key '" + key + "'");
    } else if (section == "run") {
      if (key == "seeds") cfg.run.seeds = parse_seed_list(value, where);
      else if (key == "out_dir") cfg.run.out_dir = value;
      else if (key == "jobs") cfg.run.jobs = static_cast<int>(parse_int(value, where));
      else if (key == "long") cfg.run.long_running = parse_bool(value, where);
      else throw ConfigError(where + ": unknown run key '" + key + "'");
    }
  }
  if (cfg.run.jobs < 1) throw ConfigError(origin + ": run.jobs must be >= 1");
  if (cfg.dataset.base_size == 0) cfg.dataset.base_size = cfg.dataset.size;
  if (cfg.dataset.base_size < cfg.dataset.size)
    throw ConfigError(origin + ": dataset.base_size must be >= dataset.size");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string dump_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[grid]\n"
      << "H = " << c.grid.side << "\nD = " << c.grid.ndim
      << "\nR0 = " << fmt(c.grid.r0) << "\nR1 = " << fmt(c.grid.r1)
      << "\nR2 = " << fmt(c.grid.r2) << "\n";
  out << "[dataset]\nkind = " << c.dataset.kind
      << "\nsize = " << c.dataset.size << "\nbase_size = " << c.dataset.base_size
      << "\nseed = " << c.dataset.seed << "\npath = " << c.dataset.path
      << "\nsource = " << c.dataset.source << "\n";
  out << "[online]\niters = " << c.online.iters << "\nbatch = " << c.online.batch
      << "\nlr = " << fmt(c.online.lr) << "\nexplore = " << fmt(c.online.explore)
      << "\nfm_eps = " << fmt(c.online.fm_eps)
      << "\nfm_log_space = " << (c.online.fm_log_space ? "true" : "false")
      << "\n";
  out << "[irl]\niters = " << c.irl.iters << "\nbatch = " << c.irl.batch
      << "\nactor_lr = " << fmt(c.irl.actor_lr)
      << "\ndisc_lr = " << fmt(c.irl.disc_lr)
      << "\nentropy = " << fmt(c.irl.entropy_coef) << "\npolicy_reward = "
      << (c.irl.policy_reward_log_d ? "logd" : "logit")
      << "\ndataset_state_edges = "
      << (c.irl.disc_edges_from_dataset_states ? "true" : "false") << "\n";
  out << "[prune]\nK = " << fmt(c.prune.k)
      << "\nstats_batch = " << c.prune.stats_batch << "\n";
  out << "[train]\nmethod = " << c.train.method << "\nobjective = "
      << (c.train.config.objective == Objective::fm ? "fm" : "tb")
      << "\niters = " << c.train.config.iters
      << "\nbatch = " << c.train.config.batch
      << "\nlr = " << fmt(c.train.config.lr)
      << "\nfm_eps = " << fmt(c.train.config.fm_eps) << "\nfm_log_space = "
      << (c.train.config.fm_log_space ? "true" : "false")
      << "\neval_cadence = " << c.train.config.eval_cadence
      << "\neval_samples = " << c.train.config.eval_samples
      << "\nterminal_frequency_weighting = "
      << (c.train.config.terminal_weight_by_frequency ? "true" : "false")
      << "\nno_prune = " << (c.train.no_prune ? "true" : "false")
      << "\ndataset_prune = " << (c.train.dataset_prune ? "true" : "false")
      << "\nuniform_backward = " << (c.train.uniform_backward ? "true" : "false")
      << "\nno_rebalance = " << (c.train.no_rebalance ? "true" : "false")
      << "\n";
  out << "[eval]\nsamples = " << c.eval.samples << "\n";
  out << "[run]\nseeds = ";
  for (std::size_t i = 0; i < c.run.seeds.size(); ++i)
    out << (i ? "," : "") << c.run.seeds[i];
  out << "\nout_dir = " << c.run.out_dir << "\njobs = " << c.run.jobs
      << "\nlong = " << (c.run.long_running ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace tdgfn
