#include "rct/graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

namespace rct {

namespace {

constexpr std::array<std::string_view, kEdgeTypeCount> kEdgeNames = {
    "ast", "ast_back", "last_use", "last_use_back", "returns_to", "returns_to_back",
};

void add_pair(std::vector<Edge>& edges, NodeId src, NodeId dst, EdgeType fwd) {
  edges.push_back({src, dst, fwd});
  edges.push_back({dst, src, reverse(fwd)});
}

}  // namespace

std::string_view edge_type_name(EdgeType t) { return kEdgeNames[static_cast<std::size_t>(t)]; }

std::optional<EdgeType> edge_type_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kEdgeNames.size(); ++i)
    if (kEdgeNames[i] == s) return static_cast<EdgeType>(i);
  return std::nullopt;
}

Graph build_graph(const Program& p) {
  Graph g;
  g.kinds.reserve(p.size());
  g.words.reserve(p.size());
  for (const auto& n : p.nodes) {
    g.kinds.push_back(n.kind);
    g.words.push_back(n.value);
  }
  for (const auto& n : p.nodes)
    for (NodeId c : n.children) add_pair(g.edges, n.id, c, EdgeType::Ast);

  BindingInfo info = resolve_bindings(p, BuiltinTable::standard());
  for (const auto& b : info.bindings)
    for (std::size_t i = 1; i < b.occurrences.size(); ++i)
      add_pair(g.edges, b.occurrences[i - 1], b.occurrences[i], EdgeType::LastUse);

  std::vector<NodeId> parent = p.parents();
  for (const auto& n : p.nodes) {
    if (n.kind != NodeKind::Return) continue;
    NodeId f = parent[static_cast<std::size_t>(n.id)];
    while (f != kNoNode && p.node(f).kind != NodeKind::Function) f = parent[static_cast<std::size_t>(f)];
    if (f != kNoNode) add_pair(g.edges, n.id, f, EdgeType::ReturnsTo);
  }
  return g;
}

void dump_graph(const Graph& g, std::ostream& out) {
  for (const auto& e : g.edges) out << e.src << ' ' << e.dst << ' ' << edge_type_name(e.type) << '\n';
}

// ---------------------------------------------------------------------------

std::string annotation_word(TypeLabel t) { return "<type:" + std::string(label_name(t)) + ">"; }

Vocabulary::Vocabulary() {
  push("<unknown>");
  push("<empty>");
  for (int i = 0; i < kTypeLabelCount; ++i) push(annotation_word(label_from_index(i)));
}

void Vocabulary::push(std::string w) {
  index_.emplace(w, static_cast<int>(words_.size()));
  words_.push_back(std::move(w));
}

int Vocabulary::index(std::string_view word) const {
  if (word.empty()) return kEmpty;
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnknown : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

std::vector<std::string> Vocabulary::corpus_words() const {
  return {words_.begin() + kReserved, words_.end()};
}

Vocabulary Vocabulary::build(const std::vector<const Program*>& programs, int min_count) {
  std::unordered_map<std::string, int> freq;
  for (const Program* p : programs)
    for (const auto& n : p->nodes)
      if (!n.value.empty()) ++freq[n.value];
  std::vector<std::pair<std::string, int>> kept;
  for (auto& [w, c] : freq)
    if (c >= min_count) kept.emplace_back(w, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (auto& [w, c] : kept)
    if (!v.contains(w)) v.push(w);
  return v;
}

// Count line, then one word per line with backslash and newline escaped.
void Vocabulary::save(std::ostream& out) const {
  out << "vocab " << words_.size() - kReserved << '\n';
  for (std::size_t i = kReserved; i < words_.size(); ++i) {
    for (char c : words_[i]) {
      if (c == '\\') out << "\\\\";
      else if (c == '\n') out << "\\n";
      else out << c;
    }
    out << '\n';
  }
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::string header;
  std::size_t n = 0;
  if (!(in >> header >> n) || header != "vocab") throw std::runtime_error("vocabulary: missing header");
  in.ignore(1);
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("vocabulary: truncated at entry " + std::to_string(i));
    std::string w;
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (line[k] == '\\' && k + 1 < line.size()) {
        w += line[k + 1] == 'n' ? '\n' : line[k + 1];
        ++k;
      } else {
        w += line[k];
      }
    }
    v.push(std::move(w));
  }
  return v;
}

void encode_values(Graph& g, const Vocabulary& vocab) {
  g.values.resize(g.words.size());
  for (std::size_t i = 0; i < g.words.size(); ++i) g.values[i] = vocab.index(g.words[i]);
}

}  // namespace rct
