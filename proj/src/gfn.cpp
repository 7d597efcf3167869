#include "tdgfn/gfn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include "json.hpp"

namespace tdgfn {

std::string FlowModel::to_json() const {
  nlohmann::json j;
  j["format"] = "tdgfn-flow-v1";
  j["net"] = nlohmann::json::parse(net_.to_json());
  j["log_z"] = log_z_;
  return j.dump();
}

FlowModel FlowModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "tdgfn-flow-v1")
    throw ConfigError("flow checkpoint: unknown format tag");
  FlowModel m;
  m.net_ = Mlp::from_json(j.at("net").dump());
  m.log_z_ = j.at("log_z").get<double>();
  return m;
}

LogFlowFn log_flow_fn(const FlowModel& model, const Hypergrid& env) {
  return [&model, &env](StateId s) {
    return model.net().forward1(env.features(s));
  };
}

// ---------------------------------------------------------------------------
// Backward sampler

BackwardSampler::BackwardSampler(const Hypergrid& env, const PrunedGraph& graph,
                                 const EdgeRewardTable* scores,
                                 const Dataset& data,
                                 bool weight_terminals_by_frequency)
    : env_(env), graph_(graph), scores_(scores) {
  std::unordered_map<StateId, std::pair<double, std::int64_t>> support;
  for (const Trajectory& t : data.trajectories) {
    const StateId term = t.states.back();
    if (!graph.reachable(term)) continue;
    auto [it, fresh] = support.try_emplace(term, t.terminal_reward, 0);
    it->second.second += 1;
  }
  if (support.empty())
    throw DegeneratePruning(
        "no dataset terminal survives pruning; retry with a larger K");
  for (const auto& [term, info] : support) terminals_.push_back(term);
  std::sort(terminals_.begin(), terminals_.end());
  double total = 0.0;
  for (StateId term : terminals_) {
    const auto& info = support.at(term);
    terminal_reward_.push_back(info.first);
    total += weight_terminals_by_frequency ? info.first * info.second
                                           : info.first;
    terminal_cum_.push_back(total);
  }
}

Eigen::VectorXd BackwardSampler::terminal_probs() const {
  Eigen::VectorXd p(terminal_cum_.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < terminal_cum_.size(); ++i) {
    p[i] = terminal_cum_[i] - prev;
    prev = terminal_cum_[i];
  }
  return p / terminal_cum_.back();
}

const BackwardSampler::ParentDist& BackwardSampler::parents_of(
    StateId s) const {
  auto it = cache_.find(s);
  if (it != cache_.end()) return it->second;
  ParentDist pd;
  pd.edges = graph_.kept_parents(env_, s);
  if (pd.edges.empty())
    throw ContractViolation(
        "backward sampler hit a non-root state with no kept parents");
  const std::size_t k = pd.edges.size();
  pd.log_p.resize(k);
  if (scores_) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      pd.log_p[i] = scores_->at(env_, pd.edges[i].from, pd.edges[i].action);
      hi = std::max(hi, pd.log_p[i]);
    }
    double total = 0.0;
    pd.cum.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      total += std::exp(pd.log_p[i] - hi);
      pd.cum[i] = total;
    }
    const double logz = hi + std::log(total);
    for (std::size_t i = 0; i < k; ++i) pd.log_p[i] -= logz;
  } else {
    pd.cum.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      pd.cum[i] = static_cast<double>(i + 1);
      pd.log_p[i] = -std::log(static_cast<double>(k));
    }
  }
  return cache_.emplace(s, std::move(pd)).first->second;
}

std::pair<std::vector<Edge>, Eigen::VectorXd>
BackwardSampler::parent_distribution(StateId s) const {
  const ParentDist& pd = parents_of(s);
  return {pd.edges, pd.log_p.array().exp().matrix()};
}

SampledTrajectory BackwardSampler::sample(Rng& rng) const {
  const std::size_t pick = rng.categorical_cum(terminal_cum_);
  SampledTrajectory out;
  out.traj.terminal_reward = terminal_reward_[pick];
  StateId cur = terminals_[pick];
  out.traj.states.push_back(cur);
  while (cur != env_.root()) {
    const ParentDist& pd = parents_of(cur);
    const std::size_t i = pd.edges.size() == 1 ? 0 : rng.categorical_cum(pd.cum);
    out.log_pb_sum += pd.log_p[i];
    cur = pd.edges[i].from;
    out.traj.states.push_back(cur);
  }
  std::reverse(out.traj.states.begin(), out.traj.states.end());
  return out;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

int action_between(const Hypergrid& env, StateId from, StateId to) {
  if (env.terminal(to)) return env.stop_action();
  for (int d = 0; d < env.spec().ndim; ++d)
    if (env.coord(to, d) != env.coord(from, d)) return d;
  throw ContractViolation("action_between: states are not adjacent");
}

// Deduplicated forward-pass column per state.
struct ColumnMap {
  std::unordered_map<StateId, int> index;
  std::vector<StateId> states;

  int of(StateId s) {
    auto [it, fresh] = index.try_emplace(s, static_cast<int>(states.size()));
    if (fresh) states.push_back(s);
    return it->second;
  }
};

Eigen::MatrixXd features_of(const Hypergrid& env,
                            const std::vector<StateId>& states) {
  Eigen::MatrixXd x(env.feature_dim(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    env.write_features(states[i], x.col(i).data());
  return x;
}

}  // namespace

double fm_loss_value(const Hypergrid& env, const PrunedGraph& graph,
                     const LogFlowFn& flows, const Trajectory& traj,
                     double eps, bool log_space) {
  double loss = 0.0;
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    const StateId s = traj.states[i];
    double inflow = 0.0;
    for (const Edge& e : graph.kept_parents(env, s))
      inflow += std::exp(flows(e.from)[e.action]);
    double outflow = 0.0;
    double reward = 0.0;
    if (env.terminal(s)) {
      reward = traj.terminal_reward;
    } else {
      for (const Edge& e : graph.kept_children(env, s))
        outflow += std::exp(flows(s)[e.action]);
    }
    const double r = log_space
                         ? std::log(eps + inflow) -
                               std::log(eps + reward + outflow)
                         : inflow - reward - outflow;
    loss += r * r;
  }
  return loss;
}

LossGrad fm_loss_grad(const Hypergrid& env, const PrunedGraph& graph,
                      const FlowModel& model, std::span<const Trajectory> batch,
                      double eps, bool log_space) {
  if (batch.empty()) throw ContractViolation("fm_loss_grad: empty batch");
  ColumnMap cols;
  // Parent/child edge lists per trajectory state, resolved once.
  struct Node {
    StateId state;
    bool terminal;
    double reward;
    std::vector<std::pair<int, int>> parents;  // (column, action)
    int self_col = -1;
    std::vector<int> child_actions;
  };
  std::vector<Node> nodes;
  for (const Trajectory& traj : batch) {
    for (std::size_t i = 1; i < traj.states.size(); ++i) {
      Node node;
      node.state = traj.states[i];
      node.terminal = env.terminal(node.state);
      node.reward = node.terminal ? traj.terminal_reward : 0.0;
      for (const Edge& e : graph.kept_parents(env, node.state))
        node.parents.emplace_back(cols.of(e.from), e.action);
      if (!node.terminal) {
        node.self_col = cols.of(node.state);
        for (const Edge& e : graph.kept_children(env, node.state))
          node.child_actions.push_back(e.action);
      }
      nodes.push_back(std::move(node));
    }
  }

  Mlp::Cache cache;
  const Eigen::MatrixXd log_flow =
      model.net().forward(features_of(env, cols.states), cache);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Eigen::MatrixXd out_grad =
      Eigen::MatrixXd::Zero(log_flow.rows(), log_flow.cols());
  double loss = 0.0;
  for (const Node& node : nodes) {
    double inflow = 0.0;
    for (const auto& [col, action] : node.parents)
      inflow += std::exp(log_flow(action, col));
    double outflow = 0.0;
    for (int action : node.child_actions)
      outflow += std::exp(log_flow(action, node.self_col));

    double residual, win, wout;
    if (log_space) {
      residual = std::log(eps + inflow) - std::log(eps + node.reward + outflow);
      win = 2.0 * residual / (eps + inflow);
      wout = -2.0 * residual / (eps + node.reward + outflow);
    } else {
      residual = inflow - node.reward - outflow;
      win = 2.0 * residual;
      wout = -2.0 * residual;
    }
    loss += residual * residual * inv_b;
    for (const auto& [col, action] : node.parents)
      out_grad(action, col) += inv_b * win * std::exp(log_flow(action, col));
    for (int action : node.child_actions)
      out_grad(action, node.self_col) +=
          inv_b * wout * std::exp(log_flow(action, node.self_col));
  }

  LossGrad lg;
  lg.loss = loss;
  lg.grad = Eigen::VectorXd::Zero(model.param_count());
  lg.grad.head(model.net().param_count()) =
      model.net().backward(cache, out_grad);
  return lg;
}

double tb_loss_value(const Hypergrid& env, const PrunedGraph& graph,
                     const LogFlowFn& flows, double log_z,
                     const Trajectory& traj, double log_pb_sum) {
  double log_pf = 0.0;
  for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
    const StateId s = traj.states[i];
    const int action = action_between(env, s, traj.states[i + 1]);
    const Eigen::VectorXd p =
        softmax_masked(flows(s), graph.kept_mask(env, s));
    log_pf += std::log(p[action]);
  }
  const double r =
      log_z + log_pf - log_pb_sum - std::log(traj.terminal_reward);
  return r * r;
}

LossGrad tb_loss_grad(const Hypergrid& env, const PrunedGraph& graph,
                      const FlowModel& model,
                      std::span<const SampledTrajectory> batch) {
  if (batch.empty()) throw ContractViolation("tb_loss_grad: empty batch");
  ColumnMap cols;
  struct Step {
    int col;
    int action;
  };
  std::vector<std::vector<Step>> steps(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& states = batch[i].traj.states;
    for (std::size_t t = 0; t + 1 < states.size(); ++t)
      steps[i].push_back({cols.of(states[t]),
                          action_between(env, states[t], states[t + 1])});
  }

  Mlp::Cache cache;
  const Eigen::MatrixXd log_flow =
      model.net().forward(features_of(env, cols.states), cache);
  Eigen::MatrixXd probs(log_flow.rows(), log_flow.cols());
  for (std::size_t c = 0; c < cols.states.size(); ++c)
    probs.col(c) =
        softmax_masked(log_flow.col(c), graph.kept_mask(env, cols.states[c]));

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Eigen::MatrixXd out_grad =
      Eigen::MatrixXd::Zero(log_flow.rows(), log_flow.cols());
  double loss = 0.0;
  double logz_grad = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double log_pf = 0.0;
    for (const Step& st : steps[i]) log_pf += std::log(probs(st.action, st.col));
    const double residual = model.log_z() + log_pf - batch[i].log_pb_sum -
                            std::log(batch[i].traj.terminal_reward);
    loss += residual * residual * inv_b;
    logz_grad += 2.0 * residual * inv_b;
    for (const Step& st : steps[i]) {
      const double w = 2.0 * residual * inv_b;
      for (int a = 0; a < log_flow.rows(); ++a) {
        if (probs(a, st.col) == 0.0) continue;
        out_grad(a, st.col) +=
            w * ((a == st.action ? 1.0 : 0.0) - probs(a, st.col));
      }
    }
  }

  LossGrad lg;
  lg.loss = loss;
  lg.grad = Eigen::VectorXd::Zero(model.param_count());
  lg.grad.head(model.net().param_count()) =
      model.net().backward(cache, out_grad);
  lg.grad[model.net().param_count()] = logz_grad;
  return lg;
}

// ---------------------------------------------------------------------------
// Trainers

namespace {

struct AdamWrapper {
  Adam opt;
  explicit AdamWrapper(double lr, std::int64_t n) : opt(lr, n) {}

  void apply(FlowModel& model, const Eigen::VectorXd& grad) {
    Eigen::VectorXd params(model.param_count());
    params.head(model.net().param_count()) = model.net().params();
    params[model.net().param_count()] = model.log_z();
    opt.update(params, grad);
    model.net().params() = params.head(model.net().param_count());
    model.log_z() = params[model.net().param_count()];
  }
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

TraceRow snapshot(const Hypergrid& env, const PrunedGraph& graph,
                  const Mlp& net, std::int64_t iter, std::int64_t visits,
                  double loss, int modes, std::int64_t eval_samples,
                  std::uint64_t seed, double wallclock) {
  TraceRow row;
  row.iteration = iter;
  row.cumulative_state_visits = visits;
  row.loss = loss;
  row.modes_found = modes;
  const Eigen::VectorXd dist =
      dp_terminal_distribution(env, graph, policy_probs_all(env, graph, net));
  const Hypergrid::Target target = env.target_distribution();
  row.exact_l1 = exact_l1(dist, target);
  if (eval_samples > 0) {
    Rng rng(derive_seed(seed, "snapshot", static_cast<std::uint64_t>(iter)));
    row.empirical_l1 =
        empirical_l1(sample_counts(dist, eval_samples, rng), eval_samples,
                     target);
  }
  row.wallclock_s = wallclock;
  return row;
}

}  // namespace

TrainResult train_offline(const Hypergrid& env, const Dataset& data,
                          const PrunedGraph& graph,
                          const EdgeRewardTable* scores,
                          const TrainConfig& config, std::uint64_t seed,
                          TrajectorySource source) {
  if (config.objective == Objective::tb &&
      source == TrajectorySource::dataset_uniform)
    throw ConfigError(
        "trajectory-balance training requires backward-sampled trajectories");
  validate_dataset(env, data);

  TrainResult result;
  result.model = FlowModel(env, derive_seed(seed, "flow"));
  AdamWrapper adam(config.lr, result.model.param_count());
  Rng rng(derive_seed(seed, "offline-loop"));
  std::unique_ptr<BackwardSampler> sampler;
  if (source == TrajectorySource::backward)
    sampler = std::make_unique<BackwardSampler>(
        env, graph, scores, data, config.terminal_weight_by_frequency);

  ModeTracker tracker;
  const auto t0 = std::chrono::steady_clock::now();
  result.mode_curve.reserve(config.iters);

  for (std::int64_t iter = 1; iter <= config.iters; ++iter) {
    std::vector<SampledTrajectory> batch;
    batch.reserve(config.batch);
    for (int j = 0; j < config.batch; ++j) {
      if (sampler) {
        batch.push_back(sampler->sample(rng));
      } else {
        const std::size_t idx =
            static_cast<std::size_t>(rng.below(data.size()));
        batch.push_back({data.trajectories[idx], 0.0});
      }
      tracker.update(env, batch.back().traj);
    }
    result.mode_curve.emplace_back(tracker.visits(), tracker.count());

    LossGrad lg;
    try {
      if (config.objective == Objective::fm) {
        std::vector<Trajectory> plain;
        plain.reserve(batch.size());
        for (const auto& s : batch) plain.push_back(s.traj);
        lg = fm_loss_grad(env, graph, result.model, plain, config.fm_eps,
                          config.fm_log_space);
      } else {
        lg = tb_loss_grad(env, graph, result.model, batch);
      }
      adam.apply(result.model, lg.grad);
    } catch (const NumericFault& e) {
      throw NumericFault("offline iteration " + std::to_string(iter) + ": " +
                         e.what());
    }

    const bool last = iter == config.iters;
    if (iter == 1 || last ||
        (config.eval_cadence > 0 && iter % config.eval_cadence == 0)) {
      result.trace.push_back(snapshot(
          env, graph, result.model.net(), iter, tracker.visits(), lg.loss,
          tracker.count(), config.eval_samples, seed, elapsed_s(t0)));
    }
  }
  return result;
}

FlowModel train_online(const Hypergrid& env, const OnlineConfig& config,
                       std::uint64_t seed) {
  FlowModel model(env, derive_seed(seed, "online-flow"));
  AdamWrapper adam(config.lr, model.param_count());
  Rng rng(derive_seed(seed, "online-loop"));
  const PrunedGraph full = PrunedGraph::full(env);
  NetPolicy policy(&model.net());

  for (std::int64_t iter = 1; iter <= config.iters; ++iter) {
    std::vector<Trajectory> batch =
        rollout_forward(env, policy, config.batch, rng, config.explore);
    if (config.reward_exponent != 1.0)
      for (Trajectory& t : batch)
        t.terminal_reward = std::pow(t.terminal_reward, config.reward_exponent);
    try {
      const LossGrad lg = fm_loss_grad(env, full, model, batch, config.fm_eps,
                                       config.fm_log_space);
      adam.apply(model, lg.grad);
    } catch (const NumericFault& e) {
      throw NumericFault("online iteration " + std::to_string(iter) + ": " +
                         e.what());
    }
  }
  return model;
}

double bc_loss(const Hypergrid& env, const Mlp& policy,
               std::span<const Trajectory> batch, Eigen::VectorXd* grad) {
  std::vector<StateId> states;
  std::vector<int> actions;
  for (const Trajectory& traj : batch)
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
      states.push_back(traj.states[t]);
      actions.push_back(
          action_between(env, traj.states[t], traj.states[t + 1]));
    }
  if (states.empty()) throw ContractViolation("bc_loss: empty batch");
  Mlp::Cache cache;
  const Eigen::MatrixXd logits = policy.forward(features_of(env, states), cache);
  Eigen::MatrixXd out_grad;
  if (grad) out_grad = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto mask = env.legal_mask(states[i]);
    const Eigen::VectorXd p = softmax_masked(logits.col(i), mask);
    loss -= inv * std::log(p[actions[i]]);
    if (!grad) continue;
    for (int a = 0; a < env.action_count(); ++a)
      if (mask[a])
        out_grad(a, i) = inv * (p[a] - (a == actions[i] ? 1.0 : 0.0));
  }
  if (grad) *grad = policy.backward(cache, out_grad);
  return loss;
}

BcResult train_bc(const Hypergrid& env, const Dataset& data,
                  const BcConfig& config, std::uint64_t seed) {
  validate_dataset(env, data);
  BcResult result;
  result.policy = Mlp(policy_spec(env), derive_seed(seed, "bc"));
  Adam opt(config.lr, result.policy.param_count());
  Rng rng(derive_seed(seed, "bc-loop"));
  const PrunedGraph full = PrunedGraph::full(env);
  ModeTracker tracker;
  const auto t0 = std::chrono::steady_clock::now();

  for (std::int64_t iter = 1; iter <= config.iters; ++iter) {
    std::vector<Trajectory> batch;
    batch.reserve(config.batch);
    for (int j = 0; j < config.batch; ++j) {
      batch.push_back(
          data.trajectories[static_cast<std::size_t>(rng.below(data.size()))]);
      tracker.update(env, batch.back());
    }
    Eigen::VectorXd grad;
    const double loss = bc_loss(env, result.policy, batch, &grad);
    try {
      opt.update(result.policy.params(), grad);
    } catch (const NumericFault& e) {
      throw NumericFault("bc iteration " + std::to_string(iter) + ": " +
                         e.what());
    }
    result.mode_curve.emplace_back(tracker.visits(), tracker.count());

    const bool last = iter == config.iters;
    if (iter == 1 || last ||
        (config.eval_cadence > 0 && iter % config.eval_cadence == 0)) {
      result.trace.push_back(snapshot(env, full, result.policy, iter,
                                      tracker.visits(), loss, tracker.count(),
                                      config.eval_samples, seed,
                                      elapsed_s(t0)));
    }
  }
  return result;
}

double bc_nll(const Hypergrid& env, const Mlp& policy, const Dataset& data) {
  std::vector<StateId> states;
  std::vector<int> actions;
  for (const Trajectory& traj : data.trajectories)
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
      states.push_back(traj.states[t]);
      actions.push_back(
          action_between(env, traj.states[t], traj.states[t + 1]));
    }
  const Eigen::MatrixXd logits = policy.forward(features_of(env, states));
  double nll = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Eigen::VectorXd p =
        softmax_masked(logits.col(i), env.legal_mask(states[i]));
    nll -= std::log(p[actions[i]]) / states.size();
  }
  return nll;
}

std::vector<StateId> forward_sample(const Hypergrid& env,
                                    const PrunedGraph& graph,
                                    const FlowModel& model, std::int64_t n,
                                    std::uint64_t seed) {
  Rng rng(seed);
  NetPolicy policy(&model.net(),
                   [&graph](const Hypergrid& e, StateId s) {
                     return graph.kept_mask(e, s);
                   });
  std::vector<StateId> terminals;
  terminals.reserve(n);
  const std::int64_t chunk = 4096;
  for (std::int64_t base = 0; base < n; base += chunk) {
    const std::int64_t count = std::min(chunk, n - base);
    std::vector<StateId> cur(count, env.root());
    std::vector<std::int64_t> slot(count);
    for (std::int64_t i = 0; i < count; ++i) slot[i] = base + i;
    terminals.resize(base + count);
    std::vector<StateId> active = cur;
    std::vector<std::int64_t> active_slot = slot;
    while (!active.empty()) {
      const Eigen::MatrixXd probs = policy.action_probs(env, active);
      std::vector<StateId> next;
      std::vector<std::int64_t> next_slot;
      for (std::size_t i = 0; i < active.size(); ++i) {
        const auto col = probs.col(i);
        const int action = static_cast<int>(rng.categorical(
            {col.data(), static_cast<std::size_t>(col.size())}));
        const StateId child = env.apply(active[i], action);
        if (env.terminal(child)) {
          terminals[active_slot[i]] = child;
        } else {
          next.push_back(child);
          next_slot.push_back(active_slot[i]);
        }
      }
      active = std::move(next);
      active_slot = std::move(next_slot);
    }
  }
  return terminals;
}

Eigen::VectorXd flow_terminal_distribution(const Hypergrid& env,
                                           const PrunedGraph& graph,
                                           const FlowModel& model) {
  return dp_terminal_distribution(env, graph,
                                  policy_probs_all(env, graph, model.net()));
}

}  // namespace tdgfn
