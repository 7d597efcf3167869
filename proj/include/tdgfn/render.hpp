#pragma once

#include <string>

#include "tdgfn/irl.hpp"
#include "tdgfn/pruning.hpp"

namespace tdgfn {

// Edge-score table dump: one row per legal edge, `from,action,r_e` with
// coordinates joined by '-' and actions named inc<d> / stop.
void dump_edge_table(const Hypergrid& env, const EdgeRewardTable& scores,
                     const std::string& path);
EdgeRewardTable load_edge_table(const Hypergrid& env, const std::string& path);

// Kept-edge dump: `from,action`, one row per surviving edge.
void dump_pruned_graph(const Hypergrid& env, const PrunedGraph& graph,
                       const std::string& path);
// Rebuilds the graph (including the connectivity passes) from a kept dump.
PrunedGraph load_pruned_graph(const Hypergrid& env, const std::string& path);

enum class RenderMode { heat, kept, backward };

// Deterministic SVG picture of a two-dimensional grid: edge-score heat map,
// kept-edge overlay, or backward-policy arrows. `graph` is required for the
// kept and backward modes; scores are required for heat and backward.
std::string render_svg(const Hypergrid& env, const EdgeRewardTable* scores,
                       const PrunedGraph* graph, RenderMode mode);

}  // namespace tdgfn
