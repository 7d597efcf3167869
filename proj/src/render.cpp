#include "tdgfn/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tdgfn/gfn.hpp"

namespace tdgfn {

namespace {

std::string coords_key(const Hypergrid& env, StateId interior) {
  std::string out;
  for (int d = 0; d < env.spec().ndim; ++d) {
    if (d) out += '-';
    out += std::to_string(env.coord(interior, d));
  }
  return out;
}

std::string action_name(const Hypergrid& env, int action) {
  return action == env.stop_action() ? "stop"
                                     : "inc" + std::to_string(action);
}

std::pair<StateId, int> parse_edge_row(const Hypergrid& env,
                                       const std::string& from,
                                       const std::string& action,
                                       const std::string& where) {
  Eigen::VectorXi c(env.spec().ndim);
  std::stringstream ss(from);
  std::string part;
  int d = 0;
  while (std::getline(ss, part, '-')) {
    if (d >= env.spec().ndim)
      throw ConfigError(where + ": too many coordinates");
    c[d++] = std::stoi(part);
  }
  if (d != env.spec().ndim)
    throw ConfigError(where + ": expected " +
                      std::to_string(env.spec().ndim) + " coordinates");
  int a;
  if (action == "stop") {
    a = env.stop_action();
  } else if (action.rfind("inc", 0) == 0) {
    a = std::stoi(action.substr(3));
  } else {
    throw ConfigError(where + ": unknown action '" + action + "'");
  }
  const StateId from_id = env.id_of(c, false);
  if (!env.action_legal(from_id, a))
    throw ConfigError(where + ": edge is not legal on this grid");
  return {from_id, a};
}

}  // namespace

void dump_edge_table(const Hypergrid& env, const EdgeRewardTable& scores,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "from,action,r_e\n";
  char buf[40];
  for (StateId s = 0; s < env.interior_count(); ++s)
    for (int a = 0; a < env.action_count(); ++a) {
      if (!env.action_legal(s, a)) continue;
      std::snprintf(buf, sizeof buf, "%.17g", scores.at(env, s, a));
      out << coords_key(env, s) << ',' << action_name(env, a) << ',' << buf
          << '\n';
    }
}

EdgeRewardTable load_edge_table(const Hypergrid& env, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open edge table: " + path);
  std::string line;
  std::getline(in, line);  // header
  EdgeRewardTable table;
  table.values.assign(env.edge_slot_count(), 0.0);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string from, action, value;
    if (!std::getline(ss, from, ',') || !std::getline(ss, action, ',') ||
        !std::getline(ss, value, ','))
      throw ConfigError(path + ":" + std::to_string(lineno) + ": short row");
    const auto [from_id, a] =
        parse_edge_row(env, from, action, path + ":" + std::to_string(lineno));
    table.values[env.edge_slot(from_id, a)] = std::stod(value);
  }
  return table;
}

void dump_pruned_graph(const Hypergrid& env, const PrunedGraph& graph,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "from,action\n";
  for (StateId s = 0; s < env.interior_count(); ++s)
    for (int a = 0; a < env.action_count(); ++a)
      if (env.action_legal(s, a) && graph.keeps(env, s, a))
        out << coords_key(env, s) << ',' << action_name(env, a) << '\n';
}

PrunedGraph load_pruned_graph(const Hypergrid& env, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pruned-graph dump: " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::uint8_t> kept(env.edge_slot_count(), 0);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string from, action;
    if (!std::getline(ss, from, ',') || !std::getline(ss, action, ','))
      throw ConfigError(path + ":" + std::to_string(lineno) + ": short row");
    const auto [from_id, a] =
        parse_edge_row(env, from, action, path + ":" + std::to_string(lineno));
    kept[env.edge_slot(from_id, a)] = 1;
  }
  return finalize_pruning(env, std::move(kept));
}

namespace {

struct Rgb {
  int r, g, b;
};

// Blue (low) through white to red (high).
Rgb heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {
    const double u = t * 2.0;
    return {static_cast<int>(40 + 215 * u), static_cast<int>(80 + 175 * u),
            255};
  }
  const double u = (t - 0.5) * 2.0;
  return {255, static_cast<int>(255 - 175 * u),
          static_cast<int>(255 - 215 * u)};
}

std::string color_str(Rgb c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace

std::string render_svg(const Hypergrid& env, const EdgeRewardTable* scores,
                       const PrunedGraph* graph, RenderMode mode) {
  if (env.spec().ndim != 2)
    throw ConfigError("rendering is only supported for D = 2 grids (got D = " +
                      std::to_string(env.spec().ndim) + ")");
  if ((mode == RenderMode::heat || mode == RenderMode::backward) && !scores)
    throw ConfigError("this render mode needs an edge-score table");
  if ((mode == RenderMode::kept || mode == RenderMode::backward) && !graph)
    throw ConfigError("this render mode needs a pruned graph");

  const int h = env.spec().side;
  const double cell = 64.0, margin = 48.0, radius = 7.0;
  const double size = margin * 2 + cell * (h - 1);
  auto px = [&](StateId s) {
    return std::pair<double, double>{
        margin + cell * env.coord(s, 0),
        size - margin - cell * env.coord(s, 1)};
  };

  double lo = 0.0, hi = 1.0;
  if (scores) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (StateId s = 0; s < env.interior_count(); ++s)
      for (int a = 0; a < env.action_count(); ++a)
        if (env.action_legal(s, a)) {
          lo = std::min(lo, scores->at(env, s, a));
          hi = std::max(hi, scores->at(env, s, a));
        }
    if (hi <= lo) hi = lo + 1.0;
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(size)
      << "\" height=\"" << num(size) << "\" viewBox=\"0 0 " << num(size) << ' '
      << num(size) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\""
      << "#ffffff\"/>\n";

  // Backward-policy tables when needed.
  std::vector<Eigen::VectorXd> pb;
  if (mode == RenderMode::backward) {
    pb.resize(env.state_count());
    for (StateId s = 1; s < env.state_count(); ++s) {
      if (!graph->reachable(s)) continue;
      const auto parents = graph->kept_parents(env, s);
      if (parents.empty()) continue;
      Eigen::VectorXd w(parents.size());
      for (std::size_t i = 0; i < parents.size(); ++i)
        w[i] = scores->at(env, parents[i].from, parents[i].action);
      const double shift = w.maxCoeff();
      w = (w.array() - shift).exp();
      pb[s] = w / w.sum();
    }
  }

  for (StateId s = 0; s < env.interior_count(); ++s) {
    for (int a = 0; a < env.action_count(); ++a) {
      if (!env.action_legal(s, a)) continue;
      const bool kept = graph && graph->keeps(env, s, a);
      std::string color = "#c8c8c8";
      double width = 1.5;
      if (mode == RenderMode::heat) {
        color = color_str(heat_color((scores->at(env, s, a) - lo) / (hi - lo)));
        width = 2.5;
      } else if (mode == RenderMode::kept) {
        color = kept ? "#e6b400" : "#dddddd";
        width = kept ? 3.0 : 1.0;
      } else if (mode == RenderMode::backward) {
        if (!kept) continue;
        const StateId child = env.apply(s, a);
        double p = 0.0;
        if (pb[child].size() > 0) {
          const auto parents = graph->kept_parents(env, child);
          for (std::size_t i = 0; i < parents.size(); ++i)
            if (parents[i].from == s && parents[i].action == a) p = pb[child][i];
        }
        color = "#3060c0";
        width = 0.75 + 6.0 * p;
      }
      const auto [x0, y0] = px(s);
      if (a == env.stop_action()) {
        // stop edge: ring around the node
        svg << "<circle cx=\"" << num(x0) << "\" cy=\"" << num(y0)
            << "\" r=\"" << num(radius + 4.0) << "\" fill=\"none\" stroke=\""
            << color << "\" stroke-width=\"" << num(width) << "\"/>\n";
      } else {
        const auto [x1, y1] = px(env.apply(s, a));
        // shorten toward the target so node dots stay visible
        const double t0 = radius / cell, t1 = 1.0 - (radius + 5.0) / cell;
        svg << "<line x1=\"" << num(x0 + (x1 - x0) * t0) << "\" y1=\""
            << num(y0 + (y1 - y0) * t0) << "\" x2=\"" << num(x0 + (x1 - x0) * t1)
            << "\" y2=\"" << num(y0 + (y1 - y0) * t1) << "\" stroke=\"" << color
            << "\" stroke-width=\"" << num(width) << "\"/>\n";
      }
    }
  }

  for (StateId s = 0; s < env.interior_count(); ++s) {
    const auto [x, y] = px(s);
    const bool mode_cell = env.mode_band(s);
    svg << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\""
        << num(radius) << "\" fill=\"" << (mode_cell ? "#d02020" : "#404040")
        << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tdgfn
