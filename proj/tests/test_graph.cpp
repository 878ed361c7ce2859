#include <set>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "rct/graph.hpp"

using namespace rct;

namespace {

int count_type(const Graph& g, EdgeType t) {
  int c = 0;
  for (const auto& e : g.edges) c += e.type == t;
  return c;
}

// Expected edge count from a plain recount: parent-child pairs, plus
// (usages - bindings) consecutive pairs, plus returns inside functions.
std::size_t expected_edges(const Program& p) {
  const BuiltinTable& b = BuiltinTable::standard();
  std::size_t pairs = 0, returns = 0, usages = 0, bindings = 0;
  auto parent = p.parents();
  for (const auto& n : p.nodes) {
    pairs += n.children.size();
    if (n.kind == NodeKind::Return) ++returns;
    if (n.kind == NodeKind::Param || n.kind == NodeKind::Function) ++usages, ++bindings;
    if (n.kind == NodeKind::Identifier) {
      NodeId par = parent[static_cast<std::size_t>(n.id)];
      bool callee = p.node(par).kind == NodeKind::Call && p.node(par).children[0] == n.id;
      if (!(callee && b.is_builtin_function(n.value))) ++usages;
    }
  }
  for (NodeId s : p.node(p.root).children) {
    const AstNode& st = p.node(s);
    std::set<std::string> params, assigned;
    std::vector<NodeId> body;
    if (st.kind == NodeKind::Function) {
      for (std::size_t i = 0; i + 1 < st.children.size(); ++i) params.insert(p.node(st.children[i]).value);
      body = p.node(st.children.back()).children;
    }
    for (NodeId t : body)
      if (p.node(t).kind == NodeKind::Assign && !params.count(p.node(p.node(t).children[0]).value))
        assigned.insert(p.node(p.node(t).children[0]).value);
    bindings += assigned.size();
  }
  std::set<std::string> top;
  for (NodeId s : p.node(p.root).children)
    if (p.node(s).kind == NodeKind::Assign) top.insert(p.node(p.node(s).children[0]).value);
  bindings += top.size();
  return 2 * (pairs + (usages - bindings) + returns);
}

}  // namespace

TEST_CASE("two usages give one last-use edge and its reverse") {
  Program p = parse("v = 1;\nx = v;");
  Graph g = build_graph(p);
  CHECK(count_type(g, EdgeType::LastUse) == 1);
  CHECK(count_type(g, EdgeType::LastUseBack) == 1);
  for (const auto& e : g.edges)
    if (e.type == EdgeType::LastUse) {
      CHECK(p.node(e.src).value == "v");
      CHECK(p.node(e.dst).value == "v");
      CHECK(e.src < e.dst);
    }
}

TEST_CASE("single literal has ast edges only") {
  Program p;
  NodeId lit = p.add(NodeKind::NumberLit, "1");
  p.root = p.add(NodeKind::Block, "", {lit});
  Graph g = build_graph(p);
  CHECK(g.edges.size() == 2);
  CHECK(count_type(g, EdgeType::Ast) == 1);
  CHECK(count_type(g, EdgeType::AstBack) == 1);
}

TEST_CASE("returns-to connects a return to its function") {
  Program p = parse("function f(a) { return a; }");
  Graph g = build_graph(p);
  REQUIRE(count_type(g, EdgeType::ReturnsTo) == 1);
  for (const auto& e : g.edges)
    if (e.type == EdgeType::ReturnsTo) {
      CHECK(p.node(e.src).kind == NodeKind::Return);
      CHECK(p.node(e.dst).kind == NodeKind::Function);
    }
}

TEST_CASE("graph invariants over generated programs") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Program p = generate_program(seed, {}).program;
    Graph g = build_graph(p);
    CHECK(g.num_nodes() == p.size());
    CHECK(g.edges.size() == expected_edges(p));
    std::set<std::tuple<NodeId, NodeId, int>> triples;
    for (const auto& e : g.edges) {
      CHECK(e.src >= 0);
      CHECK(static_cast<std::size_t>(e.dst) < g.num_nodes());
      triples.emplace(e.src, e.dst, static_cast<int>(e.type));
    }
    CHECK(triples.size() == g.edges.size());
    for (const auto& e : g.edges) CHECK(triples.count({e.dst, e.src, static_cast<int>(reverse(e.type))}) == 1);
  }
}

TEST_CASE("dump writes one edge per line") {
  Graph g = build_graph(parse("x = 1;"));
  std::ostringstream out;
  dump_graph(g, out);
  CHECK(out.str() ==
        "0 1 ast\n1 0 ast_back\n1 2 ast\n2 1 ast_back\n1 3 ast\n3 1 ast_back\n");
  for (int i = 0; i < kEdgeTypeCount; ++i) {
    auto t = static_cast<EdgeType>(i);
    CHECK(edge_type_from_name(edge_type_name(t)) == t);
  }
}

TEST_CASE("vocabulary contents, unknown words and determinism") {
  Program p = parse("x = 1;");
  Vocabulary v = Vocabulary::build({&p}, 1);
  CHECK(v.contains("x"));
  CHECK(v.contains("="));
  CHECK(v.contains("1"));
  CHECK(v.index("zzz") == Vocabulary::kUnknown);
  CHECK(v.index("") == Vocabulary::kEmpty);
  CHECK(v.size() == static_cast<std::size_t>(Vocabulary::kReserved) + 3);

  std::vector<Program> progs;
  for (std::uint64_t s = 0; s < 50; ++s) progs.push_back(generate_program(s, {}).program);
  std::vector<const Program*> ptrs;
  for (auto& q : progs) ptrs.push_back(&q);
  Vocabulary a = Vocabulary::build(ptrs, 2), b = Vocabulary::build(ptrs, 2);
  CHECK(a == b);
  std::ostringstream out;
  a.save(out);
  std::istringstream in(out.str());
  CHECK(Vocabulary::load(in) == a);
  for (int i = 0; i < kTypeLabelCount; ++i)
    CHECK(a.index(annotation_word(label_from_index(i))) == Vocabulary::annotation_index(label_from_index(i)));
}

TEST_CASE("vocabulary orders by frequency then lexicographically and applies the cutoff") {
  Program p = parse("b = 1;\na = 1;\nb = 2;\nc = 3;");
  Vocabulary v = Vocabulary::build({&p}, 2);
  auto words = v.corpus_words();
  REQUIRE(words.size() == 3);
  CHECK(words[0] == "=");
  CHECK(words[1] == "1");
  CHECK(words[2] == "b");
  CHECK(v.index("c") == Vocabulary::kUnknown);
}
