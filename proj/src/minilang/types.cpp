#include <algorithm>
#include <array>
#include <memory>
#include <set>

#include "rct/minilang.hpp"

namespace rct {

namespace {

constexpr std::array<std::string_view, kTypeLabelCount> kLabelNames = {
    "string", "number", "boolean", "void", "()=>string", "()=>number", "()=>boolean", "()=>void", "unk",
};

}  // namespace

std::string_view label_name(TypeLabel t) { return kLabelNames[static_cast<std::size_t>(t)]; }

std::optional<TypeLabel> label_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i)
    if (kLabelNames[i] == s) return static_cast<TypeLabel>(i);
  return std::nullopt;
}

TypeLabel label_from_index(int i) {
  if (i < 0 || i >= kTypeLabelCount) throw std::out_of_range("type label index " + std::to_string(i));
  return static_cast<TypeLabel>(i);
}

const BuiltinTable& BuiltinTable::standard() {
  static const BuiltinTable table = [] {
    using T = TypeLabel;
    BuiltinTable b;
    b.functions = {
        {"parseInt", {{T::String, T::Number}, T::Number}},
        {"parseFloat", {{T::String}, T::Number}},
        {"Number", {{T::String}, T::Number}},
        {"String", {{T::Number}, T::String}},
        {"isNaN", {{T::Number}, T::Boolean}},
        {"abs", {{T::Number}, T::Number}},
        {"max", {{T::Number, T::Number}, T::Number}},
        {"print", {{T::String}, T::Void}},
        {"alert", {{T::String}, T::Void}},
    };
    b.members[T::String] = {
        {"length", {{{}, T::Number}, true}},
        {"substring", {{{T::Number}, T::String}, false}},
        {"charAt", {{{T::Number}, T::String}, false}},
        {"indexOf", {{{T::String}, T::Number}, false}},
        {"toUpperCase", {{{}, T::String}, false}},
        {"toLowerCase", {{{}, T::String}, false}},
        {"trim", {{{}, T::String}, false}},
        {"concat", {{{T::String}, T::String}, false}},
        {"startsWith", {{{T::String}, T::Boolean}, false}},
        {"includes", {{{T::String}, T::Boolean}, false}},
    };
    b.members[T::Number] = {
        {"toFixed", {{{T::Number}, T::String}, false}},
        {"toString", {{{}, T::String}, false}},
    };
    b.members[T::Boolean] = {
        {"toString", {{{}, T::String}, false}},
    };
    return b;
  }();
  return table;
}

bool BuiltinTable::is_builtin_function(std::string_view name) const { return functions.find(name) != functions.end(); }

bool BuiltinTable::is_member_name(std::string_view name) const {
  for (const auto& [recv, ms] : members)
    if (ms.find(name) != ms.end()) return true;
  return false;
}

TypeError::TypeError(NodeId node, const std::string& what)
    : std::runtime_error("type conflict at node " + std::to_string(node) + ": " + what), node_(node) {}

// ---------------------------------------------------------------------------
// Binding resolution

namespace {

class Resolver {
 public:
  Resolver(const Program& p, const BuiltinTable& b) : p_(p), builtins_(b) {}

  BindingInfo run() {
    if (p_.root == kNoNode) return std::move(info_);
    const AstNode& root = p_.node(p_.root);
    if (root.kind != NodeKind::Block) {
      expr(p_.root, nullptr);
    } else {
      for (NodeId s : root.children) top_statement(s);
    }
    // Occurrences in source (pre-order) order.
    std::vector<int> rank(p_.size(), 0);
    auto order = p_.preorder();
    for (std::size_t i = 0; i < order.size(); ++i) rank[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    for (auto& b : info_.bindings) {
      std::sort(b.occurrences.begin(), b.occurrences.end(),
                [&](NodeId a, NodeId c) { return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(c)]; });
      b.decl = b.occurrences.front();
    }
    return std::move(info_);
  }

 private:
  using Scope = std::map<std::string, std::size_t, std::less<>>;

  std::size_t new_binding(const std::string& name, BindingKind kind, NodeId scope, NodeId first) {
    Binding b;
    b.name = name;
    b.kind = kind;
    b.scope = scope;
    b.decl = first;
    info_.bindings.push_back(std::move(b));
    return info_.bindings.size() - 1;
  }

  void occur(std::size_t binding, NodeId node) {
    info_.bindings[binding].occurrences.push_back(node);
    info_.binding_of[node] = binding;
  }

  std::optional<std::size_t> lookup(const std::string& name, const Scope* local) const {
    if (local) {
      if (auto it = local->find(name); it != local->end()) return it->second;
      if (auto it = functions_.find(name); it != functions_.end()) return it->second;
      return std::nullopt;
    }
    if (auto it = top_.find(name); it != top_.end()) return it->second;
    return std::nullopt;
  }

  void top_statement(NodeId id) {
    const AstNode& n = p_.node(id);
    if (n.kind == NodeKind::Function) {
      Scope local;
      for (std::size_t i = 0; i + 1 < n.children.size(); ++i) {
        NodeId param = n.children[i];
        std::size_t b = new_binding(p_.node(param).value, BindingKind::Parameter, id, param);
        occur(b, param);
        local[p_.node(param).value] = b;
      }
      for (NodeId s : p_.node(n.children.back()).children) statement(s, &local, id);
      std::size_t fb = new_binding(n.value, BindingKind::Function, kNoNode, id);
      occur(fb, id);
      top_[n.value] = fb;
      functions_[n.value] = fb;
      return;
    }
    statement(id, nullptr, kNoNode);
  }

  void statement(NodeId id, Scope* local, NodeId fn) {
    const AstNode& n = p_.node(id);
    switch (n.kind) {
      case NodeKind::Assign: {
        expr(n.children.at(1), local);
        NodeId target = n.children.at(0);
        const std::string& name = p_.node(target).value;
        Scope& scope = local ? *local : top_;
        if (auto it = scope.find(name); it != scope.end()) {
          occur(it->second, target);
        } else {
          std::size_t b = new_binding(name, BindingKind::Variable, fn, target);
          occur(b, target);
          scope[name] = b;
        }
        return;
      }
      case NodeKind::Return:
        for (NodeId c : n.children) expr(c, local);
        return;
      default:
        expr(id, local);
        return;
    }
  }

  void expr(NodeId id, const Scope* local) {
    const AstNode& n = p_.node(id);
    switch (n.kind) {
      case NodeKind::Identifier:
        if (auto b = lookup(n.value, local)) occur(*b, id);
        return;
      case NodeKind::Member:
        expr(n.children.at(0), local);
        return;
      case NodeKind::Property:
        expr(n.children.at(0), local);
        return;
      default:
        for (NodeId c : n.children) expr(c, local);
        return;
    }
  }

  const Program& p_;
  const BuiltinTable& builtins_;
  BindingInfo info_;
  Scope top_;
  Scope functions_;
};

}  // namespace

BindingInfo resolve_bindings(const Program& p, const BuiltinTable& builtins) { return Resolver(p, builtins).run(); }

std::vector<std::string> program_names(const Program& p) {
  std::set<std::string> names;
  for (const auto& n : p.nodes) {
    switch (n.kind) {
      case NodeKind::Function:
      case NodeKind::Param:
      case NodeKind::Identifier:
      case NodeKind::Member:
      case NodeKind::Property:
      case NodeKind::Call:
        names.insert(n.value);
        break;
      default:
        break;
    }
  }
  return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------
// Type oracle

namespace {

struct OType;
using OTypePtr = std::shared_ptr<const OType>;

struct OType {
  enum class Tag { Str, Num, Bool, Void, Func, Obj, Unk } tag = Tag::Unk;
  std::vector<std::pair<std::string, OTypePtr>> fields;  // Obj, sorted by name
  std::vector<OTypePtr> params;                           // Func
  OTypePtr ret;                                           // Func
  bool params_known = false;
};

OTypePtr prim(OType::Tag t) {
  static const std::array<OTypePtr, 7> cache = [] {
    std::array<OTypePtr, 7> c{};
    for (int i = 0; i < 7; ++i) {
      auto o = std::make_shared<OType>();
      o->tag = static_cast<OType::Tag>(i);
      c[static_cast<std::size_t>(i)] = o;
    }
    return c;
  }();
  return cache[static_cast<std::size_t>(t)];
}

OTypePtr from_label(TypeLabel l) {
  switch (l) {
    case TypeLabel::String: return prim(OType::Tag::Str);
    case TypeLabel::Number: return prim(OType::Tag::Num);
    case TypeLabel::Boolean: return prim(OType::Tag::Bool);
    case TypeLabel::Void: return prim(OType::Tag::Void);
    case TypeLabel::FnString:
    case TypeLabel::FnNumber:
    case TypeLabel::FnBoolean:
    case TypeLabel::FnVoid: {
      auto f = std::make_shared<OType>();
      f->tag = OType::Tag::Func;
      f->ret = from_label(static_cast<TypeLabel>(static_cast<int>(l) - 4));
      return f;
    }
    case TypeLabel::Unk: return prim(OType::Tag::Unk);
  }
  return prim(OType::Tag::Unk);
}

OTypePtr func(std::vector<OTypePtr> params, OTypePtr ret) {
  auto f = std::make_shared<OType>();
  f->tag = OType::Tag::Func;
  f->params = std::move(params);
  f->params_known = true;
  f->ret = std::move(ret);
  return f;
}

bool same(const OTypePtr& a, const OTypePtr& b) {
  if (a->tag != b->tag) return false;
  switch (a->tag) {
    case OType::Tag::Func:
      return same(a->ret, b->ret);
    case OType::Tag::Obj:
      if (a->fields.size() != b->fields.size()) return false;
      for (std::size_t i = 0; i < a->fields.size(); ++i)
        if (a->fields[i].first != b->fields[i].first || !same(a->fields[i].second, b->fields[i].second)) return false;
      return true;
    default:
      return true;
  }
}

TypeLabel to_label(const OTypePtr& t) {
  switch (t->tag) {
    case OType::Tag::Str: return TypeLabel::String;
    case OType::Tag::Num: return TypeLabel::Number;
    case OType::Tag::Bool: return TypeLabel::Boolean;
    case OType::Tag::Void: return TypeLabel::Void;
    case OType::Tag::Func:
      switch (t->ret->tag) {
        case OType::Tag::Str: return TypeLabel::FnString;
        case OType::Tag::Num: return TypeLabel::FnNumber;
        case OType::Tag::Bool: return TypeLabel::FnBoolean;
        case OType::Tag::Void: return TypeLabel::FnVoid;
        default: return TypeLabel::Unk;
      }
    default: return TypeLabel::Unk;
  }
}

std::string describe(const OTypePtr& t) { return std::string(label_name(to_label(t))); }

bool is_arith(std::string_view op) {
  return op == "-" || op == "*" || op == "/" || op == "%" || op == "<<" || op == ">>" || op == "&" || op == "|" ||
         op == "^";
}
bool is_relational(std::string_view op) { return op == "<" || op == ">" || op == "<=" || op == ">="; }
bool is_equality(std::string_view op) { return op == "==" || op == "!=" || op == "===" || op == "!=="; }
bool is_logical(std::string_view op) { return op == "&&" || op == "||"; }

class Oracle {
 public:
  Oracle(const Program& p, const BuiltinTable& b, const ParamEnv& params)
      : p_(p), builtins_(b), params_(params), info_(resolve_bindings(p, b)) {}

  TypeMap run() {
    binding_types_.assign(info_.bindings.size(), nullptr);
    if (p_.root == kNoNode) return out_;
    const AstNode& root = p_.node(p_.root);
    if (root.kind != NodeKind::Block) {
      expr(p_.root);
      return out_;
    }
    for (NodeId s : root.children) top_statement(s);
    return out_;
  }

 private:
  void record(NodeId id, const OTypePtr& t) { out_[id] = to_label(t); }

  [[noreturn]] void conflict(NodeId id, const std::string& what) const { throw TypeError(id, what); }

  std::optional<std::size_t> binding(NodeId occ) const {
    auto it = info_.binding_of.find(occ);
    if (it == info_.binding_of.end()) return std::nullopt;
    return it->second;
  }

  void top_statement(NodeId id) {
    const AstNode& n = p_.node(id);
    if (n.kind != NodeKind::Function) {
      statement(id);
      return;
    }
    std::vector<OTypePtr> params;
    for (std::size_t i = 0; i + 1 < n.children.size(); ++i) {
      NodeId param = n.children[i];
      auto it = params_.find(param);
      OTypePtr t = it == params_.end() ? prim(OType::Tag::Unk) : from_label(it->second);
      binding_types_[*binding(param)] = t;
      record(param, t);
      params.push_back(t);
    }
    OTypePtr ret;
    return_type_ = &ret;
    for (NodeId s : p_.node(n.children.back()).children) statement(s);
    return_type_ = nullptr;
    if (!ret) ret = prim(OType::Tag::Void);
    OTypePtr ft = func(std::move(params), ret);
    binding_types_[*binding(id)] = ft;
    record(id, ft);
  }

  void statement(NodeId id) {
    const AstNode& n = p_.node(id);
    switch (n.kind) {
      case NodeKind::Assign: {
        OTypePtr t = expr(n.children.at(1));
        NodeId target = n.children.at(0);
        const std::string& name = p_.node(target).value;
        if (builtins_.is_builtin_function(name)) conflict(target, "assignment to builtin '" + name + "'");
        std::size_t b = *binding(target);
        if (info_.bindings[b].kind == BindingKind::Function) conflict(target, "assignment to function '" + name + "'");
        if (t->tag == OType::Tag::Void) conflict(target, "assignment of a void value");
        if (binding_types_[b]) {
          if (!same(binding_types_[b], t))
            conflict(target, "'" + name + "' is " + describe(binding_types_[b]) + " but assigned " + describe(t));
        } else {
          binding_types_[b] = t;
        }
        record(target, binding_types_[b]);
        return;
      }
      case NodeKind::Return: {
        if (!return_type_) conflict(id, "return outside function");
        OTypePtr t = n.children.empty() ? prim(OType::Tag::Void) : expr(n.children[0]);
        if (*return_type_ && !same(*return_type_, t))
          conflict(id, "return type " + describe(t) + " disagrees with " + describe(*return_type_));
        if (!*return_type_) *return_type_ = t;
        return;
      }
      case NodeKind::Function:
        conflict(id, "nested function");
      default:
        expr(id);
        return;
    }
  }

  OTypePtr lookup_identifier(NodeId id) {
    const AstNode& n = p_.node(id);
    if (auto b = binding(id)) {
      OTypePtr t = binding_types_[*b];
      if (!t) conflict(id, "'" + n.value + "' used before assignment");
      return t;
    }
    auto it = builtins_.functions.find(n.value);
    if (it == builtins_.functions.end()) conflict(id, "undeclared name '" + n.value + "'");
    std::vector<OTypePtr> ps;
    for (TypeLabel l : it->second.params) ps.push_back(from_label(l));
    return func(std::move(ps), from_label(it->second.result));
  }

  void check_args(NodeId call, const std::vector<OTypePtr>& params, const std::vector<OTypePtr>& args,
                  const std::string& name) {
    if (params.size() != args.size())
      conflict(call, "'" + name + "' expects " + std::to_string(params.size()) + " arguments, got " +
                         std::to_string(args.size()));
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i]->tag != OType::Tag::Unk && !same(params[i], args[i]))
        conflict(call, "argument " + std::to_string(i) + " of '" + name + "' is " + describe(args[i]) + ", expected " +
                           describe(params[i]));
  }

  const BuiltinTable::Member* member_of(const OTypePtr& recv, const std::string& name) const {
    TypeLabel l = to_label(recv);
    auto it = builtins_.members.find(l);
    if (it == builtins_.members.end() || recv->tag == OType::Tag::Func) return nullptr;
    auto m = it->second.find(name);
    return m == it->second.end() ? nullptr : &m->second;
  }

  OTypePtr expr(NodeId id) {
    const AstNode& n = p_.node(id);
    OTypePtr t;
    switch (n.kind) {
      case NodeKind::NumberLit: t = prim(OType::Tag::Num); break;
      case NodeKind::StringLit: t = prim(OType::Tag::Str); break;
      case NodeKind::BoolLit: t = prim(OType::Tag::Bool); break;
      case NodeKind::Identifier: t = lookup_identifier(id); break;
      case NodeKind::BinaryExpr: {
        OTypePtr a = expr(n.children.at(0));
        OTypePtr b = expr(n.children.at(1));
        using Tag = OType::Tag;
        const std::string& op = n.value;
        if (op == "+" && a->tag == Tag::Str && b->tag == Tag::Str) t = prim(Tag::Str);
        else if ((op == "+" || is_arith(op)) && a->tag == Tag::Num && b->tag == Tag::Num) t = prim(Tag::Num);
        else if (is_relational(op) && a->tag == b->tag && (a->tag == Tag::Num || a->tag == Tag::Str)) t = prim(Tag::Bool);
        else if (is_equality(op) && same(a, b) && a->tag != Tag::Void) t = prim(Tag::Bool);
        else if (is_logical(op) && a->tag == Tag::Bool && b->tag == Tag::Bool) t = prim(Tag::Bool);
        else conflict(id, "operator '" + op + "' on " + describe(a) + " and " + describe(b));
        break;
      }
      case NodeKind::Ternary: {
        OTypePtr c = expr(n.children.at(0));
        if (c->tag != OType::Tag::Bool) conflict(id, "ternary condition is " + describe(c));
        OTypePtr a = expr(n.children.at(1));
        OTypePtr b = expr(n.children.at(2));
        if (!same(a, b)) conflict(id, "ternary branches " + describe(a) + " and " + describe(b) + " disagree");
        t = a;
        break;
      }
      case NodeKind::Member: {
        OTypePtr recv = expr(n.children.at(0));
        if (recv->tag == OType::Tag::Obj) {
          auto it = std::find_if(recv->fields.begin(), recv->fields.end(),
                                 [&](const auto& f) { return f.first == n.value; });
          if (it == recv->fields.end()) conflict(id, "object has no field '" + n.value + "'");
          t = it->second;
        } else if (const auto* m = member_of(recv, n.value)) {
          if (m->is_field) {
            t = from_label(m->sig.result);
          } else {
            std::vector<OTypePtr> ps;
            for (TypeLabel l : m->sig.params) ps.push_back(from_label(l));
            t = func(std::move(ps), from_label(m->sig.result));
          }
        } else {
          conflict(id, describe(recv) + " has no member '" + n.value + "'");
        }
        break;
      }
      case NodeKind::Call: {
        NodeId callee = n.children.at(0);
        const AstNode& cn = p_.node(callee);
        std::vector<OTypePtr> args;
        if (cn.kind == NodeKind::Identifier) {
          OTypePtr ft = lookup_identifier(callee);
          bool user = binding(callee).has_value();
          if (user) record(callee, ft);
          for (std::size_t i = 1; i < n.children.size(); ++i) args.push_back(expr(n.children[i]));
          if (ft->tag != OType::Tag::Func) conflict(id, "'" + cn.value + "' is not callable");
          if (ft->params_known) check_args(id, ft->params, args, cn.value);
          t = ft->ret;
        } else if (cn.kind == NodeKind::Member) {
          OTypePtr recv = expr(cn.children.at(0));
          const auto* m = member_of(recv, cn.value);
          if (!m || m->is_field) conflict(id, describe(recv) + " has no method '" + cn.value + "'");
          for (std::size_t i = 1; i < n.children.size(); ++i) args.push_back(expr(n.children[i]));
          std::vector<OTypePtr> ps;
          for (TypeLabel l : m->sig.params) ps.push_back(from_label(l));
          check_args(id, ps, args, cn.value);
          t = from_label(m->sig.result);
        } else {
          conflict(id, "callee must be a name or member");
        }
        if (n.value != cn.value) conflict(id, "call name '" + n.value + "' does not match callee '" + cn.value + "'");
        break;
      }
      case NodeKind::ObjectLit: {
        auto o = std::make_shared<OType>();
        o->tag = OType::Tag::Obj;
        for (NodeId pid : n.children) {
          const AstNode& prop = p_.node(pid);
          OTypePtr v = expr(prop.children.at(0));
          if (v->tag == OType::Tag::Void) conflict(pid, "void field value");
          for (const auto& f : o->fields)
            if (f.first == prop.value) conflict(pid, "duplicate key '" + prop.value + "'");
          o->fields.emplace_back(prop.value, v);
          record(pid, v);
        }
        std::sort(o->fields.begin(), o->fields.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        t = o;
        break;
      }
      default:
        conflict(id, std::string(kind_name(n.kind)) + " is not an expression");
    }
    record(id, t);
    return t;
  }

  const Program& p_;
  const BuiltinTable& builtins_;
  const ParamEnv& params_;
  BindingInfo info_;
  std::vector<OTypePtr> binding_types_;
  OTypePtr* return_type_ = nullptr;
  TypeMap out_;
};

}  // namespace

TypeMap infer_types(const Program& p, const BuiltinTable& builtins, const ParamEnv& params) {
  return Oracle(p, builtins, params).run();
}

std::vector<NodeId> typed_positions(const Program& p, const BuiltinTable& builtins) {
  BindingInfo info = resolve_bindings(p, builtins);
  std::vector<NodeId> parent = p.parents();
  std::vector<NodeId> out;
  for (NodeId id : p.preorder()) {
    const AstNode& n = p.node(id);
    NodeId par = parent[static_cast<std::size_t>(id)];
    bool callee = par != kNoNode && p.node(par).kind == NodeKind::Call && p.node(par).children.front() == id;
    switch (n.kind) {
      case NodeKind::Function:
      case NodeKind::Param:
      case NodeKind::NumberLit:
      case NodeKind::StringLit:
      case NodeKind::BoolLit:
      case NodeKind::BinaryExpr:
      case NodeKind::Ternary:
      case NodeKind::ObjectLit:
      case NodeKind::Property:
      case NodeKind::Call:
        out.push_back(id);
        break;
      case NodeKind::Identifier:
        if (!callee || info.binding_of.count(id)) out.push_back(id);
        break;
      case NodeKind::Member:
        if (!callee) out.push_back(id);
        break;
      default:
        break;
    }
  }
  return out;
}

}  // namespace rct
