#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>

#include "rct/graph.hpp"

namespace rct {

/// Local class of an edge: its type and the kinds of both endpoints. Value
/// attributes never enter a feature.
struct EdgeFeature {
  EdgeType type = EdgeType::Ast;
  NodeKind src = NodeKind::Block;
  NodeKind dst = NodeKind::Block;

  /// Dense index in [0, kEdgeFeatureCount).
  int index() const;
  static EdgeFeature from_index(int i);
  /// `edgetype srckind dstkind`
  std::string str() const;

  friend auto operator<=>(const EdgeFeature&, const EdgeFeature&) = default;
};
inline constexpr int kEdgeFeatureCount = kEdgeTypeCount * kNodeKindCount * kNodeKindCount;

EdgeFeature edge_feature(const Graph& g, const Edge& e);

/// Set of retained edge features.
class Abstraction {
 public:
  Abstraction() = default;
  explicit Abstraction(std::set<EdgeFeature> features) : features_(std::move(features)) {}
  /// Every possible feature; applying it is the identity.
  static Abstraction full();

  bool contains(const EdgeFeature& f) const { return features_.count(f) > 0; }
  std::size_t size() const { return features_.size(); }
  const std::set<EdgeFeature>& features() const { return features_; }

  /// One feature per line, sorted.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Abstraction load(std::istream& in);
  static Abstraction load(const std::filesystem::path& path);

  friend bool operator==(const Abstraction&, const Abstraction&) = default;

 private:
  std::set<EdgeFeature> features_;
};

/// Keeps the edges whose feature is in `alpha`; nodes are untouched.
Graph apply_abstraction(const Abstraction& alpha, const Graph& g);

}  // namespace rct
