#pragma once

#include <utility>

#include "rct/refine.hpp"

namespace rct::testing::six_node {

// Worked six-node instance: kinds A A B C B D for nodes 1..6 (stored 0..5),
// sink at node 1 with a = 0.3, node 6 with a = 0.7.
constexpr NodeKind A = NodeKind::Identifier;
constexpr NodeKind B = NodeKind::Call;
constexpr NodeKind C = NodeKind::NumberLit;
constexpr NodeKind D = NodeKind::StringLit;

inline Graph six_node_graph() {
  Graph g;
  g.kinds = {A, A, B, C, B, D};
  g.words.assign(6, "");
  g.values.assign(6, 0);
  const std::pair<int, int> edges[] = {{1, 2}, {1, 3}, {2, 1}, {2, 4}, {2, 5}, {3, 1}, {3, 6}, {4, 2}, {5, 2}, {6, 3}};
  for (auto [s, d] : edges) g.edges.push_back({s - 1, d - 1, EdgeType::Ast});
  return g;
}

inline FlowInput six_node_input(const Graph& g) {
  FlowInput in;
  in.id = "six";
  in.graph = &g;
  in.sink = 0;
  in.attribution = {0.3, 0, 0, 0, 0, 0.7};
  return in;
}

// The two features the optimum pays for, 70 units each.
inline const EdgeFeature kQ3{EdgeType::Ast, B, A};
inline const EdgeFeature kQ7{EdgeType::Ast, D, B};

}  // namespace rct::testing::six_node
