#include "rct/minilang.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <sstream>

namespace rct {

namespace {

constexpr std::array<std::string_view, kNodeKindCount> kKindNames = {
    "Function", "Param",   "Assign",   "BinaryExpr", "Ternary",   "Call",     "Member", "Identifier",
    "NumberLit", "StringLit", "BoolLit", "ObjectLit", "Property", "Return", "Block",
};

constexpr std::array<std::string_view, 4> kKeywords = {"function", "return", "true", "false"};

// Longest punctuators first.
constexpr std::array<std::string_view, 33> kPuncts = {
    "===", "!==", "==", "!=", "<=", ">=", "<<", ">>", "&&", "||", "+", "-", "*", "/", "%", "<", ">",
    "&",   "|",   "^",  "=",  "?",  ":",  ";",  ",",  ".",  "(",  ")", "{", "}", "!", "[", "]",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

}  // namespace

std::string_view kind_name(NodeKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<NodeKind> kind_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<NodeKind>(i);
  return std::nullopt;
}

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

NodeId Program::add(NodeKind kind, std::string value, std::vector<NodeId> children) {
  AstNode n;
  n.id = static_cast<NodeId>(nodes.size());
  n.kind = kind;
  n.value = std::move(value);
  n.children = std::move(children);
  nodes.push_back(std::move(n));
  return nodes.back().id;
}

std::vector<NodeId> Program::parents() const {
  std::vector<NodeId> parent(nodes.size(), kNoNode);
  for (const auto& n : nodes)
    for (NodeId c : n.children) parent.at(static_cast<std::size_t>(c)) = n.id;
  return parent;
}

std::vector<NodeId> Program::preorder() const {
  std::vector<NodeId> order;
  if (root == kNoNode) return order;
  order.reserve(nodes.size());
  std::vector<NodeId> stack{root};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = node(id).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

void Program::validate() const {
  if (root == kNoNode) throw std::logic_error("program has no root");
  std::vector<int> parent_count(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id != static_cast<NodeId>(i)) throw std::logic_error("node id does not match arena slot");
    for (NodeId c : nodes[i].children) {
      if (c < 0 || static_cast<std::size_t>(c) >= nodes.size())
        throw std::logic_error("child id " + std::to_string(c) + " not in arena");
      ++parent_count[static_cast<std::size_t>(c)];
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    int expected = static_cast<NodeId>(i) == root ? 0 : 1;
    if (parent_count[i] != expected)
      throw std::logic_error("node " + std::to_string(i) + " has " + std::to_string(parent_count[i]) + " parents");
  }
  if (preorder().size() != nodes.size()) throw std::logic_error("unreachable nodes in arena");
}

bool isomorphic(const Program& a, const Program& b) {
  if (a.root == kNoNode || b.root == kNoNode) return a.root == b.root;
  std::function<bool(NodeId, NodeId)> eq = [&](NodeId x, NodeId y) {
    const auto& nx = a.node(x);
    const auto& ny = b.node(y);
    if (nx.kind != ny.kind || nx.value != ny.value || nx.children.size() != ny.children.size()) return false;
    for (std::size_t i = 0; i < nx.children.size(); ++i)
      if (!eq(nx.children[i], ny.children[i])) return false;
    return true;
  };
  return eq(a.root, b.root);
}

std::vector<std::pair<NodeId, NodeId>> match_preorder(const Program& a, const Program& b) {
  auto pa = a.preorder();
  auto pb = b.preorder();
  if (pa.size() != pb.size()) throw std::logic_error("trees differ in size");
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) out.emplace_back(pa[i], pb[i]);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string join_expected(const std::vector<std::string>& e) {
  std::string s;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i) s += ", ";
    s += e[i];
  }
  return s;
}

}  // namespace

SyntaxError::SyntaxError(int line, int column, std::vector<std::string> expected, std::string found)
    : std::runtime_error("syntax error at " + std::to_string(line) + ":" + std::to_string(column) +
                         ": expected one of {" + join_expected(expected) + "} but found '" + found + "'"),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1;
  std::size_t line_start = 0;
  auto col = [&](std::size_t pos) { return static_cast<int>(pos - line_start) + 1; };
  while (true) {
    while (i < src.size()) {
      char c = src[i];
      if (c == '\n') {
        ++line;
        line_start = ++i;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
        while (i < src.size() && src[i] != '\n') ++i;
      } else {
        break;
      }
    }
    Token t;
    t.offset = i;
    t.line = line;
    t.column = col(i);
    if (i >= src.size()) {
      t.kind = TokenKind::End;
      out.push_back(t);
      return out;
    }
    char c = src[i];
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = is_keyword(t.text) ? TokenKind::Keyword : TokenKind::Ident;
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      t.kind = TokenKind::Number;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else if (c == '"' || c == '\'') {
      char quote = c;
      std::size_t j = i + 1;
      std::string value;
      bool closed = false;
      while (j < src.size()) {
        char d = src[j];
        if (d == '\n') break;
        if (d == quote) {
          closed = true;
          ++j;
          break;
        }
        if (d == '\\' && j + 1 < src.size()) {
          char e = src[j + 1];
          switch (e) {
            case 'n': value += '\n'; break;
            case 't': value += '\t'; break;
            default: value += e; break;
          }
          j += 2;
          continue;
        }
        value += d;
        ++j;
      }
      if (!closed) throw SyntaxError(line, col(i), {"closing quote"}, "end of line");
      t.kind = TokenKind::String;
      t.text = std::move(value);
      i = j;
    } else {
      bool matched = false;
      for (auto p : kPuncts) {
        if (src.substr(i, p.size()) == p) {
          t.kind = TokenKind::Punct;
          t.text = std::string(p);
          i += p.size();
          matched = true;
          break;
        }
      }
      if (!matched) throw SyntaxError(line, col(i), {"token"}, std::string(1, c));
    }
    out.push_back(std::move(t));
  }
}

// ---------------------------------------------------------------------------

namespace {

struct BinaryLevel {
  std::vector<std::string_view> ops;
};

// Lowest precedence first; all left-associative.
const std::vector<BinaryLevel>& binary_levels() {
  static const std::vector<BinaryLevel> levels = {
      {{"||"}},
      {{"&&"}},
      {{"|"}},
      {{"^"}},
      {{"&"}},
      {{"===", "!==", "==", "!="}},
      {{"<=", ">=", "<", ">"}},
      {{"<<", ">>"}},
      {{"+", "-"}},
      {{"*", "/", "%"}},
  };
  return levels;
}

class Parser {
 public:
  Parser(std::string_view src) : src_(src), toks_(tokenize(src)) {}

  Program parse_program() {
    std::vector<NodeId> stmts;
    std::size_t begin = peek().offset;
    while (peek().kind != TokenKind::End) stmts.push_back(statement(false, {"function", "return", "identifier", "expression"}));
    // Block root is added last; rebuilt in pre-order below.
    NodeId root = prog_.add(NodeKind::Block, "", std::move(stmts));
    prog_.node(root).span = {begin, src_.size()};
    prog_.root = root;
    prog_.source = std::string(src_);
    return renumber_preorder(std::move(prog_));
  }

  Program parse_single_expression() {
    std::size_t begin = peek().offset;
    NodeId e = expression();
    if (peek().kind != TokenKind::End) fail({"end of input"});
    (void)begin;
    prog_.root = e;
    prog_.source = std::string(src_);
    return renumber_preorder(std::move(prog_));
  }

  static Program renumber_preorder(Program p) {
    auto order = p.preorder();
    std::vector<NodeId> remap(p.nodes.size(), kNoNode);
    for (std::size_t i = 0; i < order.size(); ++i) remap[static_cast<std::size_t>(order[i])] = static_cast<NodeId>(i);
    Program out;
    out.source = std::move(p.source);
    out.nodes.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      AstNode n = std::move(p.nodes[static_cast<std::size_t>(order[i])]);
      n.id = static_cast<NodeId>(i);
      for (auto& c : n.children) c = remap[static_cast<std::size_t>(c)];
      out.nodes[i] = std::move(n);
    }
    out.root = out.nodes.empty() ? kNoNode : 0;
    return out;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t k = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[k];
  }
  const Token& advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  bool at_punct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokenKind::Punct && peek(ahead).text == p;
  }
  bool at_keyword(std::string_view k) const { return peek().kind == TokenKind::Keyword && peek().text == k; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const Token& t = peek();
    std::string found = t.kind == TokenKind::End ? "end of input" : t.text;
    throw SyntaxError(t.line, t.column, std::move(expected), found);
  }

  const Token& expect_punct(std::string_view p) {
    if (!at_punct(p)) fail({std::string(p)});
    return advance();
  }

  std::string expect_ident() {
    if (peek().kind != TokenKind::Ident) fail({"identifier"});
    return advance().text;
  }

  NodeId finish(NodeId id, std::size_t begin) {
    prog_.node(id).span = {begin, prev_end()};
    return id;
  }

  std::size_t prev_end() const {
    if (pos_ == 0) return 0;
    const Token& t = toks_[pos_ - 1];
    if (t.kind == TokenKind::String) {
      // Quoted text: scan to the closing quote on the same line.
      std::size_t j = t.offset + 1;
      char q = src_[t.offset];
      while (j < src_.size() && src_[j] != q) j += (src_[j] == '\\') ? 2 : 1;
      return std::min(j + 1, src_.size());
    }
    return t.offset + t.text.size();
  }

  NodeId statement(bool in_function, std::vector<std::string> expected) {
    std::size_t begin = peek().offset;
    if (at_keyword("function")) {
      if (in_function) fail({"statement (nested functions are not supported)"});
      advance();
      std::string name = expect_ident();
      expect_punct("(");
      std::vector<NodeId> children;
      if (!at_punct(")")) {
        while (true) {
          std::size_t pb = peek().offset;
          children.push_back(finish(prog_.add(NodeKind::Param, expect_ident()), pb));
          if (at_punct(",")) {
            advance();
            continue;
          }
          break;
        }
      }
      expect_punct(")");
      std::size_t bb = peek().offset;
      expect_punct("{");
      std::vector<NodeId> body;
      while (!at_punct("}")) {
        if (peek().kind == TokenKind::End) fail({"}"});
        body.push_back(statement(true, {"return", "identifier", "expression", "}"}));
      }
      expect_punct("}");
      children.push_back(finish(prog_.add(NodeKind::Block, "", std::move(body)), bb));
      return finish(prog_.add(NodeKind::Function, std::move(name), std::move(children)), begin);
    }
    if (at_keyword("return")) {
      if (!in_function) fail({"statement (return outside function)"});
      advance();
      std::vector<NodeId> children;
      if (!at_punct(";")) children.push_back(expression());
      expect_punct(";");
      return finish(prog_.add(NodeKind::Return, "", std::move(children)), begin);
    }
    if (peek().kind == TokenKind::Ident && at_punct("=", 1)) {
      std::size_t ib = peek().offset;
      NodeId target = finish(prog_.add(NodeKind::Identifier, advance().text), ib);
      advance();  // '='
      NodeId rhs = expression();
      expect_punct(";");
      return finish(prog_.add(NodeKind::Assign, "=", {target, rhs}), begin);
    }
    if (peek().kind == TokenKind::End || at_punct("}")) fail(std::move(expected));
    NodeId e = expression();
    expect_punct(";");
    return e;
  }

  NodeId expression() {
    std::size_t begin = peek().offset;
    NodeId cond = binary(0);
    if (!at_punct("?")) return cond;
    advance();
    NodeId then_e = expression();
    expect_punct(":");
    NodeId else_e = expression();
    return finish(prog_.add(NodeKind::Ternary, "?", {cond, then_e, else_e}), begin);
  }

  NodeId binary(std::size_t level) {
    const auto& levels = binary_levels();
    if (level >= levels.size()) return postfix();
    std::size_t begin = peek().offset;
    NodeId lhs = binary(level + 1);
    while (true) {
      const Token& t = peek();
      if (t.kind != TokenKind::Punct) break;
      const auto& ops = levels[level].ops;
      if (std::find(ops.begin(), ops.end(), std::string_view(t.text)) == ops.end()) break;
      std::string op = advance().text;
      NodeId rhs = binary(level + 1);
      lhs = finish(prog_.add(NodeKind::BinaryExpr, std::move(op), {lhs, rhs}), begin);
    }
    return lhs;
  }

  NodeId postfix() {
    std::size_t begin = peek().offset;
    NodeId e = primary();
    while (true) {
      if (at_punct(".")) {
        advance();
        std::string name = expect_ident();
        e = finish(prog_.add(NodeKind::Member, std::move(name), {e}), begin);
      } else if (at_punct("(")) {
        const AstNode& callee = prog_.node(e);
        if (callee.kind != NodeKind::Identifier && callee.kind != NodeKind::Member) fail({";", "operator"});
        std::string name = callee.value;
        advance();
        std::vector<NodeId> children{e};
        if (!at_punct(")")) {
          while (true) {
            children.push_back(expression());
            if (at_punct(",")) {
              advance();
              continue;
            }
            break;
          }
        }
        expect_punct(")");
        e = finish(prog_.add(NodeKind::Call, std::move(name), std::move(children)), begin);
      } else {
        return e;
      }
    }
  }

  NodeId primary() {
    std::size_t begin = peek().offset;
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Number:
        return finish(prog_.add(NodeKind::NumberLit, advance().text), begin);
      case TokenKind::String:
        return finish(prog_.add(NodeKind::StringLit, advance().text), begin);
      case TokenKind::Ident:
        return finish(prog_.add(NodeKind::Identifier, advance().text), begin);
      case TokenKind::Keyword:
        if (t.text == "true" || t.text == "false") return finish(prog_.add(NodeKind::BoolLit, advance().text), begin);
        break;
      case TokenKind::Punct:
        if (t.text == "(") {
          advance();
          NodeId e = expression();
          expect_punct(")");
          return e;
        }
        if (t.text == "{") {
          advance();
          std::vector<NodeId> props;
          if (!at_punct("}")) {
            while (true) {
              std::size_t pb = peek().offset;
              std::string key = expect_ident();
              expect_punct(":");
              NodeId v = expression();
              props.push_back(finish(prog_.add(NodeKind::Property, std::move(key), {v}), pb));
              if (at_punct(",")) {
                advance();
                continue;
              }
              break;
            }
          }
          expect_punct("}");
          return finish(prog_.add(NodeKind::ObjectLit, "", std::move(props)), begin);
        }
        break;
      case TokenKind::End:
        break;
    }
    fail({"number", "string", "true", "false", "identifier", "(", "{"});
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Program prog_;
};

// ---------------------------------------------------------------------------

bool compound(const AstNode& n) {
  return n.kind == NodeKind::BinaryExpr || n.kind == NodeKind::Ternary || n.kind == NodeKind::Assign;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c; break;
    }
  }
  out += '"';
  return out;
}

class Printer {
 public:
  explicit Printer(const Program& p) : p_(p) {}

  std::string expr(NodeId id) const {
    const AstNode& n = p_.node(id);
    switch (n.kind) {
      case NodeKind::NumberLit:
      case NodeKind::BoolLit:
      case NodeKind::Identifier:
        return n.value;
      case NodeKind::StringLit:
        return quote(n.value);
      case NodeKind::BinaryExpr:
        return operand(n.children.at(0)) + " " + n.value + " " + operand(n.children.at(1));
      case NodeKind::Ternary:
        return operand(n.children.at(0)) + " ? " + operand(n.children.at(1)) + " : " + operand(n.children.at(2));
      case NodeKind::Member: {
        NodeId r = n.children.at(0);
        const AstNode& rn = p_.node(r);
        std::string recv = (compound(rn) || rn.kind == NodeKind::ObjectLit) ? "(" + expr(r) + ")" : expr(r);
        return recv + "." + n.value;
      }
      case NodeKind::Call: {
        std::string s = expr(n.children.at(0)) + "(";
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          if (i > 1) s += ", ";
          s += expr(n.children[i]);
        }
        return s + ")";
      }
      case NodeKind::ObjectLit: {
        std::string s = "{";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i) s += ", ";
          const AstNode& prop = p_.node(n.children[i]);
          s += prop.value + ": " + expr(prop.children.at(0));
        }
        return s + "}";
      }
      default:
        throw std::logic_error("node " + std::to_string(id) + " (" + std::string(kind_name(n.kind)) +
                               ") is not an expression");
    }
  }

  void statement(NodeId id, int indent, std::string& out) const {
    const AstNode& n = p_.node(id);
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    switch (n.kind) {
      case NodeKind::Function: {
        out += pad + "function " + n.value + "(";
        std::size_t nparams = n.children.size() - 1;
        for (std::size_t i = 0; i < nparams; ++i) {
          if (i) out += ", ";
          out += p_.node(n.children[i]).value;
        }
        out += ") {";
        const AstNode& body = p_.node(n.children.back());
        if (body.children.empty()) {
          out += "}";
          return;
        }
        for (NodeId s : body.children) {
          out += "\n";
          statement(s, indent + 1, out);
        }
        out += "\n" + pad + "}";
        return;
      }
      case NodeKind::Return:
        out += pad + (n.children.empty() ? std::string("return;") : "return " + expr(n.children[0]) + ";");
        return;
      case NodeKind::Assign:
        out += pad + expr(n.children.at(0)) + " = " + expr(n.children.at(1)) + ";";
        return;
      default:
        out += pad + expr(id) + ";";
        return;
    }
  }

 private:
  std::string operand(NodeId id) const {
    const AstNode& n = p_.node(id);
    return compound(n) ? "(" + expr(id) + ")" : expr(id);
  }

  const Program& p_;
};

}  // namespace

Program parse(std::string_view source) { return Parser(source).parse_program(); }

Program parse_expression(std::string_view source) { return Parser(source).parse_single_expression(); }

std::string print(const Program& p) {
  if (p.root == kNoNode) return "";
  Printer pr(p);
  const AstNode& root = p.node(p.root);
  if (root.kind != NodeKind::Block) return pr.expr(p.root);
  std::string out;
  for (std::size_t i = 0; i < root.children.size(); ++i) {
    if (i) out += "\n";
    pr.statement(root.children[i], 0, out);
  }
  return out;
}

std::string print_expression(const Program& p, NodeId id) { return Printer(p).expr(id); }

}  // namespace rct
