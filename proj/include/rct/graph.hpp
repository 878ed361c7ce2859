#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "rct/minilang.hpp"

namespace rct {

/// Directed edge attributes. Every base edge type appears once per
/// direction; `reverse(t)` maps a variant to its partner.
enum class EdgeType : std::uint8_t {
  Ast,           // parent -> child
  AstBack,       // child -> parent
  LastUse,       // earlier usage -> next usage of the same binding
  LastUseBack,
  ReturnsTo,     // return statement -> enclosing function
  ReturnsToBack,
};
inline constexpr int kEdgeTypeCount = 6;

std::string_view edge_type_name(EdgeType t);
std::optional<EdgeType> edge_type_from_name(std::string_view s);
inline EdgeType reverse(EdgeType t) { return static_cast<EdgeType>(static_cast<int>(t) ^ 1); }

struct Edge {
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  EdgeType type = EdgeType::Ast;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Attributed directed graph over the AST nodes of one program. Node i of the
/// graph is AST node i. `words` holds the raw value attribute; `values` holds
/// its vocabulary index once encoded.
struct Graph {
  std::vector<NodeKind> kinds;
  std::vector<std::string> words;
  std::vector<int> values;
  std::vector<Edge> edges;

  std::size_t num_nodes() const { return kinds.size(); }
};

Graph build_graph(const Program& p);

/// One edge per line: `src dst edgetype`.
void dump_graph(const Graph& g, std::ostream& out);

// ---------------------------------------------------------------------------
// Vocabulary

/// Word index. Index 0 is the unknown word, 1 the empty value, and 2..10 the
/// annotation tokens standing for predicted labels (see `annotation_word`).
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;
  static constexpr int kEmpty = 1;
  static constexpr int kFirstAnnotation = 2;
  static constexpr int kReserved = kFirstAnnotation + kTypeLabelCount;

  Vocabulary();

  int index(std::string_view word) const;
  const std::string& word(int index) const { return words_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  /// Retained corpus words (reserved entries excluded), in index order.
  std::vector<std::string> corpus_words() const;

  static Vocabulary build(const std::vector<const Program*>& programs, int min_count);
  static int annotation_index(TypeLabel t) { return kFirstAnnotation + label_index(t); }

  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  void push(std::string w);

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Spelling of the annotation token for a label; never a valid identifier.
std::string annotation_word(TypeLabel t);

/// Fills `g.values` from `g.words`.
void encode_values(Graph& g, const Vocabulary& vocab);

}  // namespace rct
