#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rct {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class NodeKind : std::uint8_t {
  Function,
  Param,
  Assign,
  BinaryExpr,
  Ternary,
  Call,
  Member,
  Identifier,
  NumberLit,
  StringLit,
  BoolLit,
  ObjectLit,
  Property,
  Return,
  Block,
};
inline constexpr int kNodeKindCount = 15;

std::string_view kind_name(NodeKind k);
std::optional<NodeKind> kind_from_name(std::string_view s);

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct AstNode {
  NodeId id = kNoNode;
  NodeKind kind = NodeKind::Block;
  std::string value;
  std::vector<NodeId> children;
  SourceSpan span;
};

/// Arena-backed syntax tree. Node ids index `nodes` directly; every node in
/// the arena is reachable from `root`.
class Program {
 public:
  NodeId root = kNoNode;
  std::vector<AstNode> nodes;
  std::string source;

  const AstNode& node(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }
  AstNode& node(NodeId id) { return nodes.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes.size(); }

  NodeId add(NodeKind kind, std::string value, std::vector<NodeId> children = {});

  /// Parent of every node (kNoNode for the root).
  std::vector<NodeId> parents() const;
  /// Node ids in pre-order.
  std::vector<NodeId> preorder() const;
  /// Structural check of the tree invariants; throws std::logic_error.
  void validate() const;
};

/// Kind, value and child structure equal; ids ignored.
bool isomorphic(const Program& a, const Program& b);
/// Pairs of ids matched by a parallel pre-order walk of isomorphic trees.
std::vector<std::pair<NodeId, NodeId>> match_preorder(const Program& a, const Program& b);

// ---------------------------------------------------------------------------
// Lexing and parsing

enum class TokenKind : std::uint8_t { Ident, Keyword, Number, String, Punct, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  std::size_t offset = 0;
  int line = 1;
  int column = 1;
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(int line, int column, std::vector<std::string> expected, std::string found);
  int line() const { return line_; }
  int column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  int line_;
  int column_;
  std::vector<std::string> expected_;
};

std::vector<Token> tokenize(std::string_view source);
Program parse(std::string_view source);
/// Parses a single expression (used for dead-code conditions in logs).
Program parse_expression(std::string_view source);
std::string print(const Program& p);
std::string print_expression(const Program& p, NodeId id);

bool is_keyword(std::string_view word);

// ---------------------------------------------------------------------------
// Types

enum class TypeLabel : std::uint8_t {
  String,
  Number,
  Boolean,
  Void,
  FnString,
  FnNumber,
  FnBoolean,
  FnVoid,
  Unk,
};
inline constexpr int kTypeLabelCount = 9;

std::string_view label_name(TypeLabel t);
std::optional<TypeLabel> label_from_name(std::string_view s);
TypeLabel label_from_index(int i);
inline int label_index(TypeLabel t) { return static_cast<int>(t); }

struct Signature {
  std::vector<TypeLabel> params;
  TypeLabel result = TypeLabel::Unk;
};

/// Builtin functions and the members of primitive receivers.
struct BuiltinTable {
  std::map<std::string, Signature, std::less<>> functions;
  // receiver label -> member name -> signature. A member with no params and
  // `is_field` set is a property read (e.g. string length).
  struct Member {
    Signature sig;
    bool is_field = false;
  };
  std::map<TypeLabel, std::map<std::string, Member, std::less<>>> members;

  static const BuiltinTable& standard();
  bool is_builtin_function(std::string_view name) const;
  bool is_member_name(std::string_view name) const;
};

class TypeError : public std::runtime_error {
 public:
  TypeError(NodeId node, const std::string& what);
  NodeId node() const { return node_; }

 private:
  NodeId node_;
};

using TypeMap = std::map<NodeId, TypeLabel>;
using ParamEnv = std::map<NodeId, TypeLabel>;

/// Ground-truth type oracle. Returns a label for every typed node: function
/// declarations, parameters, variable occurrences, constants and every
/// expression except callee positions of builtin and method calls.
TypeMap infer_types(const Program& p, const BuiltinTable& builtins, const ParamEnv& params);

/// True for the node kinds/positions that `infer_types` labels.
std::vector<NodeId> typed_positions(const Program& p, const BuiltinTable& builtins);

// ---------------------------------------------------------------------------
// Scopes and bindings

enum class BindingKind : std::uint8_t { Variable, Parameter, Function };

struct Binding {
  NodeId decl = kNoNode;  // first occurrence (param node, function node or first assign target)
  std::string name;
  BindingKind kind = BindingKind::Variable;
  NodeId scope = kNoNode;  // enclosing Function node, or kNoNode for top level
  std::vector<NodeId> occurrences;  // in source order, including decl
};

/// Resolves every variable/parameter/function-name occurrence. Builtin names
/// are not bindings.
struct BindingInfo {
  std::vector<Binding> bindings;
  std::map<NodeId, std::size_t> binding_of;  // occurrence node -> index into bindings
};
BindingInfo resolve_bindings(const Program& p, const BuiltinTable& builtins);

/// All words occurring as identifiers, field names, keys or function names.
std::vector<std::string> program_names(const Program& p);

// ---------------------------------------------------------------------------
// Generator

struct GeneratorConfig {
  int min_statements = 5;
  int max_statements = 10;
  int max_functions = 2;
  int max_params = 3;
  int max_depth = 3;
  double hinted_name_prob = 0.8;
  void validate() const;
};

struct GeneratedProgram {
  Program program;
  TypeMap types;
  ParamEnv params;
};

GeneratedProgram generate_program(std::uint64_t seed, const GeneratorConfig& config);

}  // namespace rct
