#include <set>

#include "doctest.h"
#include "rct/minilang.hpp"

using namespace rct;

namespace {

const char* kOverviewProgram =
    "function convert(hex, radix) {\n"
    "  v = parseInt(hex.substring(1), radix);\n"
    "  return v;\n"
    "}";

NodeId find_node(const Program& p, NodeKind k, const std::string& value) {
  for (const auto& n : p.nodes)
    if (n.kind == k && n.value == value) return n.id;
  return kNoNode;
}

// Independent count of expected labels: walks the tree and decides by parent
// context alone whether a node is a typed position.
std::size_t count_typed(const Program& p, NodeId id, bool callee) {
  const AstNode& n = p.node(id);
  std::size_t c = 0;
  switch (n.kind) {
    case NodeKind::Assign:
    case NodeKind::Return:
    case NodeKind::Block:
      break;
    case NodeKind::Identifier:
      c = (!callee || !BuiltinTable::standard().is_builtin_function(n.value)) ? 1 : 0;
      break;
    case NodeKind::Member:
      c = callee ? 0 : 1;
      break;
    default:
      c = 1;
  }
  for (std::size_t i = 0; i < n.children.size(); ++i)
    c += count_typed(p, n.children[i], n.kind == NodeKind::Call && i == 0);
  return c;
}

}  // namespace

TEST_CASE("parse assigns pre-order ids and builds the call tree") {
  Program p = parse("v = parseInt(hex.substring(1), radix);");
  p.validate();
  const AstNode& root = p.node(p.root);
  CHECK(root.kind == NodeKind::Block);
  REQUIRE(root.children.size() == 1);
  const AstNode& assign = p.node(root.children[0]);
  CHECK(assign.kind == NodeKind::Assign);
  const AstNode& call = p.node(assign.children[1]);
  CHECK(call.kind == NodeKind::Call);
  CHECK(call.value == "parseInt");
  CHECK(call.children.size() == 3);
  auto order = p.preorder();
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == static_cast<NodeId>(i));
}

TEST_CASE("empty input is an empty block") {
  Program p = parse("");
  CHECK(p.size() == 1);
  CHECK(p.node(p.root).kind == NodeKind::Block);
  CHECK(p.node(p.root).children.empty());
  CHECK(print(p).empty());
}

TEST_CASE("single literal prints with a semicolon") {
  Program p;
  NodeId lit = p.add(NodeKind::NumberLit, "1");
  p.root = p.add(NodeKind::Block, "", {lit});
  CHECK(print(p) == "1;");
}

TEST_CASE("printer keeps one parseInt per call site") {
  std::string out = print(parse(kOverviewProgram));
  CHECK(out.find("parseInt") == out.rfind("parseInt"));
  CHECK(out.find("parseInt") != std::string::npos);
}

TEST_CASE("syntax errors carry position and expected tokens") {
  try {
    parse("x = ;");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 5);
    CHECK_FALSE(e.expected().empty());
  }
  CHECK_THROWS_AS(parse("x = \"open"), SyntaxError);
  CHECK_THROWS_AS(parse("return 1;"), SyntaxError);
  CHECK_THROWS_AS(parse("x = 1 # 2;"), SyntaxError);
}

TEST_CASE("precedence and parenthesization survive a round trip") {
  const char* cases[] = {
      "x = 1 + 2 * 3;",
      "x = (1 + 2) * 3;",
      "x = a - (b - c);",
      "x = true ? 1 : false ? 2 : 3;",
      "x = (\"a\" + \"b\").length;",
      "y = {name: \"q\\\"z\", count: 2}.count;",
      "x = a << 2 >> 1 & 3 | 4 ^ 5;",
  };
  for (const char* src : cases) {
    Program a = parse(src);
    Program b = parse(print(a));
    CHECK_MESSAGE(isomorphic(a, b), src);
    CHECK(print(b) == print(a));
  }
  Program sub = parse("x = a - (b - c);");
  const AstNode& rhs = sub.node(sub.node(sub.node(sub.root).children[0]).children[1]);
  CHECK(sub.node(rhs.children[1]).kind == NodeKind::BinaryExpr);
}

TEST_CASE("label names round trip and the set is closed") {
  std::set<std::string> names;
  for (int i = 0; i < kTypeLabelCount; ++i) {
    TypeLabel t = label_from_index(i);
    names.insert(std::string(label_name(t)));
    CHECK(label_from_name(label_name(t)) == t);
  }
  CHECK(names.size() == 9);
  CHECK_FALSE(label_from_name("object").has_value());
  CHECK_THROWS(label_from_index(9));
}

TEST_CASE("oracle types the parseInt snippet") {
  Program p = parse(kOverviewProgram);
  ParamEnv env;
  env[find_node(p, NodeKind::Param, "hex")] = TypeLabel::String;
  env[find_node(p, NodeKind::Param, "radix")] = TypeLabel::Number;
  TypeMap t = infer_types(p, BuiltinTable::standard(), env);
  CHECK(t.at(find_node(p, NodeKind::Call, "parseInt")) == TypeLabel::Number);
  CHECK(t.at(find_node(p, NodeKind::Call, "substring")) == TypeLabel::String);
  CHECK(t.at(find_node(p, NodeKind::Identifier, "v")) == TypeLabel::Number);
  CHECK(t.at(find_node(p, NodeKind::Function, "convert")) == TypeLabel::FnNumber);
  CHECK(t.at(find_node(p, NodeKind::NumberLit, "1")) == TypeLabel::Number);
  CHECK(t.count(find_node(p, NodeKind::Identifier, "parseInt")) == 0);
}

TEST_CASE("oracle on a string literal") {
  Program p = parse("\"a\";");
  TypeMap t = infer_types(p, BuiltinTable::standard(), {});
  CHECK(t.at(find_node(p, NodeKind::StringLit, "a")) == TypeLabel::String);
}

TEST_CASE("oracle rejects conflicts and names the node") {
  auto conflict_at = [](const char* src) {
    Program p = parse(src);
    try {
      infer_types(p, BuiltinTable::standard(), {});
    } catch (const TypeError& e) {
      return e.node();
    }
    return kNoNode;
  };
  CHECK(conflict_at("x = 1 ? 2 : 3;") != kNoNode);
  CHECK(conflict_at("x = true ? 2 : \"a\";") != kNoNode);
  CHECK(conflict_at("x = 1; x = \"a\";") != kNoNode);
  CHECK(conflict_at("x = y;") != kNoNode);
  CHECK(conflict_at("x = parseInt(1, 2);") != kNoNode);
  CHECK(conflict_at("x = 1 + \"a\";") != kNoNode);
  CHECK(conflict_at("x = {a: 1}.b;") != kNoNode);
  CHECK(conflict_at("x = 1; x = \"a\";") == find_node(parse("x = 1; x = \"a\";"), NodeKind::Identifier, "x") + 3);
}

TEST_CASE("ternary gets the type of its agreeing branches") {
  Program p = parse("x = true ? \"a\" : \"b\";");
  TypeMap t = infer_types(p, BuiltinTable::standard(), {});
  CHECK(t.at(find_node(p, NodeKind::Ternary, "?")) == TypeLabel::String);
}

TEST_CASE("bindings follow scopes and source order") {
  Program p = parse(
      "function f(a) { b = a + 1; a = b; return a; }\n"
      "a = f(2);\n"
      "c = a + f(a);");
  BindingInfo info = resolve_bindings(p, BuiltinTable::standard());
  std::map<std::string, int> per_name;
  for (const auto& b : info.bindings) per_name[b.name]++;
  CHECK(per_name["a"] == 2);  // parameter and top-level variable
  CHECK(per_name["f"] == 1);
  for (const auto& b : info.bindings) {
    if (b.name == "f") {
      CHECK(b.kind == BindingKind::Function);
      CHECK(b.occurrences.size() == 3);
      CHECK(b.decl == find_node(p, NodeKind::Function, "f"));
    }
    if (b.name == "a" && b.kind == BindingKind::Parameter) CHECK(b.occurrences.size() == 4);
    if (b.name == "a" && b.kind == BindingKind::Variable) CHECK(b.occurrences.size() == 3);
    for (std::size_t i = 1; i < b.occurrences.size(); ++i) CHECK(b.occurrences[i - 1] < b.occurrences[i]);
  }
}

TEST_CASE("generator: empty statement range gives an empty program") {
  GeneratorConfig cfg;
  cfg.min_statements = cfg.max_statements = 0;
  auto g = generate_program(7, cfg);
  CHECK(g.program.node(g.program.root).children.empty());
  CHECK(g.types.empty());
}

TEST_CASE("generator: config validation") {
  GeneratorConfig cfg;
  cfg.min_statements = 4;
  cfg.max_statements = 3;
  CHECK_THROWS_AS(generate_program(0, cfg), std::invalid_argument);
  cfg = {};
  cfg.hinted_name_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("generator: seed 0 type-checks") {
  auto g = generate_program(0, GeneratorConfig{});
  CHECK_NOTHROW(infer_types(g.program, BuiltinTable::standard(), g.params));
  CHECK_FALSE(g.types.empty());
}

TEST_CASE("generator: determinism") {
  for (std::uint64_t s : {1ULL, 99ULL, 123456789ULL}) {
    CHECK(print(generate_program(s, {}).program) == print(generate_program(s, {}).program));
  }
  CHECK(print(generate_program(1, {}).program) != print(generate_program(2, {}).program));
}

TEST_CASE("round trip, idempotent printing and oracle agreement over 1000 programs") {
  const BuiltinTable& b = BuiltinTable::standard();
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto g = generate_program(seed, {});
    const Program& p = g.program;
    p.validate();
    std::string text = print(p);
    Program again = parse(text);
    REQUIRE_MESSAGE(isomorphic(p, again), "seed " << seed);
    REQUIRE(print(again) == text);

    TypeMap t;
    try {
      t = infer_types(p, b, g.params);
    } catch (const TypeError& e) {
      FAIL("seed " << seed << ": " << e.what() << "\n" << text);
    }
    if (t != g.types) ++mismatches;
    CHECK(t.size() == count_typed(p, p.root, false));
    CHECK(typed_positions(p, b).size() == t.size());
  }
  CHECK(mismatches == 0);
}
