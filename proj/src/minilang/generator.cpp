#include <algorithm>
#include <random>
#include <set>

#include "rct/minilang.hpp"

namespace rct {

void GeneratorConfig::validate() const {
  if (min_statements < 0 || max_statements < min_statements)
    throw std::invalid_argument("generator: statement range must satisfy 0 <= min <= max");
  if (max_functions < 0 || max_params < 0) throw std::invalid_argument("generator: negative function/param bound");
  if (max_depth < 1) throw std::invalid_argument("generator: max_depth must be >= 1");
  if (!(hinted_name_prob >= 0.0 && hinted_name_prob <= 1.0))
    throw std::invalid_argument("generator: hinted_name_prob must lie in [0, 1]");
}

namespace {

enum class Prim { Str, Num, Bool, Void };

TypeLabel prim_label(Prim p) {
  switch (p) {
    case Prim::Str: return TypeLabel::String;
    case Prim::Num: return TypeLabel::Number;
    case Prim::Bool: return TypeLabel::Boolean;
    case Prim::Void: return TypeLabel::Void;
  }
  return TypeLabel::Unk;
}

TypeLabel fn_label(Prim ret) { return static_cast<TypeLabel>(static_cast<int>(prim_label(ret)) + 4); }

// Name pools correlated with types; the generic pool carries no type hint.
const std::vector<std::string> kStrNames = {"name", "text", "label", "title", "prefix", "suffix", "msg", "str",
                                            "hex", "word", "line", "key", "path", "url", "tag", "color"};
const std::vector<std::string> kNumNames = {"count", "total", "n", "i", "radix", "size", "len", "index",
                                            "width", "height", "offset", "num", "amount", "sum", "limit", "depth"};
const std::vector<std::string> kBoolNames = {"flag", "done", "ok", "valid", "isEmpty", "found", "enabled",
                                             "visible", "ready", "active", "hidden", "checked"};
const std::vector<std::string> kObjNames = {"obj", "config", "item", "data", "opts", "record", "point", "entry"};
const std::vector<std::string> kFnAliasNames = {"handler", "callback", "fn", "action"};
const std::vector<std::string> kGenericNames = {"a", "b", "c", "x", "y", "z", "tmp", "val",
                                                "foo", "bar", "res", "v", "t", "q", "k", "w"};
const std::vector<std::string> kStrFns = {"getName", "format", "toLabel", "buildMessage", "describe", "joinParts"};
const std::vector<std::string> kNumFns = {"computeTotal", "getSize", "parseValue", "measure", "area", "clampValue"};
const std::vector<std::string> kBoolFns = {"isValid", "check", "hasItems", "isReady", "matches", "contains"};
const std::vector<std::string> kVoidFns = {"log", "report", "update", "render", "notify", "reset"};
const std::vector<std::string> kStrFields = {"name", "title", "label", "kind", "id"};
const std::vector<std::string> kNumFields = {"count", "size", "width", "x", "y", "age"};
const std::vector<std::string> kBoolFields = {"enabled", "visible", "done", "open"};
const std::vector<std::string> kStrConsts = {"a", "abc", "hello", "world", "#ff0000", "0x1f", "42", "key", "", "data"};

struct Field {
  std::string name;
  Prim type;
};

struct GType {
  enum class Tag { Prim, Obj, Func } tag = Tag::Prim;
  Prim prim = Prim::Num;           // Prim: the type; Func: return type
  std::vector<Field> fields;       // Obj
  std::vector<Prim> params;        // Func
};

bool same_type(const GType& a, const GType& b) {
  if (a.tag != b.tag) return false;
  if (a.tag == GType::Tag::Obj) {
    if (a.fields.size() != b.fields.size()) return false;
    for (std::size_t i = 0; i < a.fields.size(); ++i)
      if (a.fields[i].name != b.fields[i].name || a.fields[i].type != b.fields[i].type) return false;
    return true;
  }
  return a.prim == b.prim;
}

struct Var {
  std::string name;
  GType type;
};

struct UserFn {
  std::string name;
  std::vector<Prim> params;
  Prim ret;
};

class Generator {
 public:
  Generator(std::uint64_t seed, const GeneratorConfig& cfg) : rng_(seed), cfg_(cfg) {}

  GeneratedProgram run() {
    int n = uniform(cfg_.min_statements, cfg_.max_statements);
    int max_fns = std::min(cfg_.max_functions, n / 2);
    int nfns = max_fns > 0 ? uniform(0, max_fns) : 0;
    std::vector<NodeId> stmts;
    for (int i = 0; i < nfns; ++i) stmts.push_back(function());
    for (int i = nfns; i < n; ++i) stmts.push_back(top_statement());
    prog_.root = prog_.add(NodeKind::Block, "", std::move(stmts));
    return finish();
  }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  Prim random_value_prim() { return static_cast<Prim>(uniform(0, 2)); }

  NodeId add(NodeKind k, std::string value, std::vector<NodeId> children = {}) {
    return prog_.add(k, std::move(value), std::move(children));
  }
  NodeId add_typed(NodeKind k, std::string value, std::vector<NodeId> children, TypeLabel t) {
    NodeId id = add(k, std::move(value), std::move(children));
    types_[id] = t;
    return id;
  }

  bool name_taken(const std::string& s) const {
    if (BuiltinTable::standard().is_builtin_function(s) || is_keyword(s)) return true;
    if (std::any_of(fns_.begin(), fns_.end(), [&](const UserFn& f) { return f.name == s; })) return true;
    if (std::any_of(scope().begin(), scope().end(), [&](const Var& v) { return v.name == s; })) return true;
    return false;
  }

  // Fresh name, preferring the type-hinted pool; falls back to numbered names.
  std::string fresh(const std::vector<std::string>& hinted) {
    const auto& pool = chance(cfg_.hinted_name_prob) ? hinted : kGenericNames;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const std::string& s = pick(pool);
      if (!name_taken(s)) return s;
    }
    for (int i = 1;; ++i) {
      std::string s = pick(pool) + std::to_string(i);
      if (!name_taken(s)) return s;
    }
  }

  const std::vector<std::string>& pool_for(const GType& t) const {
    if (t.tag == GType::Tag::Obj) return kObjNames;
    if (t.tag == GType::Tag::Func) return kFnAliasNames;
    switch (t.prim) {
      case Prim::Str: return kStrNames;
      case Prim::Num: return kNumNames;
      default: return kBoolNames;
    }
  }

  std::vector<Var>& scope() { return in_function_ ? locals_ : globals_; }
  const std::vector<Var>& scope() const { return in_function_ ? locals_ : globals_; }

  // Functions visible at the current point: all declared so far.
  std::vector<const UserFn*> fns_returning(Prim ret) const {
    std::vector<const UserFn*> out;
    for (const auto& f : fns_)
      if (f.ret == ret) out.push_back(&f);
    return out;
  }

  std::vector<const Var*> vars_of(Prim p) const {
    std::vector<const Var*> out;
    for (const auto& v : scope())
      if (v.type.tag == GType::Tag::Prim && v.type.prim == p) out.push_back(&v);
    return out;
  }

  std::vector<std::pair<const Var*, const Field*>> fields_of(Prim p) const {
    std::vector<std::pair<const Var*, const Field*>> out;
    for (const auto& v : scope())
      if (v.type.tag == GType::Tag::Obj)
        for (const auto& f : v.type.fields)
          if (f.type == p) out.emplace_back(&v, &f);
    return out;
  }

  NodeId literal(Prim p) {
    switch (p) {
      case Prim::Str: return add_typed(NodeKind::StringLit, pick(kStrConsts), {}, TypeLabel::String);
      case Prim::Num: {
        std::string text = chance(0.15) ? std::to_string(uniform(0, 99)) + "." + std::to_string(uniform(1, 9))
                                        : std::to_string(uniform(0, 100));
        return add_typed(NodeKind::NumberLit, text, {}, TypeLabel::Number);
      }
      case Prim::Bool: return add_typed(NodeKind::BoolLit, chance(0.5) ? "true" : "false", {}, TypeLabel::Boolean);
      case Prim::Void: break;
    }
    throw std::logic_error("generator: no literal of type void");
  }

  NodeId var_ref(const Var& v) {
    TypeLabel l = TypeLabel::Unk;
    if (v.type.tag == GType::Tag::Prim) l = prim_label(v.type.prim);
    if (v.type.tag == GType::Tag::Func) l = fn_label(v.type.prim);
    return add_typed(NodeKind::Identifier, v.name, {}, l);
  }

  NodeId user_call(const UserFn& f, int depth) {
    NodeId callee = add_typed(NodeKind::Identifier, f.name, {}, fn_label(f.ret));
    std::vector<NodeId> ch{callee};
    for (Prim p : f.params) ch.push_back(expr(p, depth + 1));
    return add_typed(NodeKind::Call, f.name, std::move(ch), prim_label(f.ret));
  }

  NodeId builtin_call(const std::string& name, std::vector<NodeId> args, Prim result) {
    NodeId callee = add(NodeKind::Identifier, name);
    args.insert(args.begin(), callee);
    return add_typed(NodeKind::Call, name, std::move(args), prim_label(result));
  }

  NodeId method_call(NodeId recv, const std::string& name, std::vector<NodeId> args, Prim result) {
    NodeId callee = add(NodeKind::Member, name, {recv});
    args.insert(args.begin(), callee);
    return add_typed(NodeKind::Call, name, std::move(args), prim_label(result));
  }

  NodeId binary(const std::string& op, NodeId a, NodeId b, Prim result) {
    return add_typed(NodeKind::BinaryExpr, op, {a, b}, prim_label(result));
  }

  NodeId expr(Prim p, int depth) {
    bool leaf = depth >= cfg_.max_depth || chance(0.25 + 0.2 * depth);
    auto vars = vars_of(p);
    if (leaf) {
      if (!vars.empty() && chance(0.6)) return var_ref(*pick(vars));
      return literal(p);
    }
    auto fns = fns_returning(p);
    auto fields = fields_of(p);
    int d = depth + 1;
    // Each branch is tried in random order until one applies.
    for (int attempt = 0; attempt < 16; ++attempt) {
      int choice = uniform(0, 5);
      if (choice == 0 && !fns.empty()) return user_call(*pick(fns), depth);
      if (choice == 1 && !fields.empty()) {
        auto [v, f] = pick(fields);
        return add_typed(NodeKind::Member, f->name, {var_ref(*v)}, prim_label(p));
      }
      if (choice == 2) {
        NodeId c = expr(Prim::Bool, d);
        NodeId a = expr(p, d);
        NodeId b = expr(p, d);
        return add_typed(NodeKind::Ternary, "?", {c, a, b}, prim_label(p));
      }
      if (choice >= 3) return compound(p, d);
    }
    return literal(p);
  }

  NodeId compound(Prim p, int d) {
    switch (p) {
      case Prim::Num:
        switch (uniform(0, 7)) {
          case 0: {
            static const std::vector<std::string> ops = {"+", "-", "*", "/", "%", "<<", ">>", "&", "|", "^"};
            const std::string& op = pick(ops);
            NodeId a = expr(Prim::Num, d);
            return binary(op, a, expr(Prim::Num, d), Prim::Num);
          }
          case 1: return add_typed(NodeKind::Member, "length", {expr(Prim::Str, d)}, TypeLabel::Number);
          case 2: {
            NodeId r = expr(Prim::Str, d);
            return method_call(r, "indexOf", {expr(Prim::Str, d)}, Prim::Num);
          }
          case 3: {
            NodeId s = expr(Prim::Str, d);
            return builtin_call("parseInt", {s, expr(Prim::Num, d)}, Prim::Num);
          }
          case 4: return builtin_call(chance(0.5) ? "parseFloat" : "Number", {expr(Prim::Str, d)}, Prim::Num);
          case 5: return builtin_call("abs", {expr(Prim::Num, d)}, Prim::Num);
          case 6: {
            NodeId a = expr(Prim::Num, d);
            return builtin_call("max", {a, expr(Prim::Num, d)}, Prim::Num);
          }
          default: {
            NodeId a = expr(Prim::Num, d);
            return binary("+", a, expr(Prim::Num, d), Prim::Num);
          }
        }
      case Prim::Str:
        switch (uniform(0, 7)) {
          case 0: {
            NodeId a = expr(Prim::Str, d);
            return binary("+", a, expr(Prim::Str, d), Prim::Str);
          }
          case 1: {
            NodeId r = expr(Prim::Str, d);
            return method_call(r, chance(0.5) ? "substring" : "charAt", {expr(Prim::Num, d)}, Prim::Str);
          }
          case 2: {
            static const std::vector<std::string> ms = {"toUpperCase", "toLowerCase", "trim"};
            return method_call(expr(Prim::Str, d), pick(ms), {}, Prim::Str);
          }
          case 3: {
            NodeId r = expr(Prim::Str, d);
            return method_call(r, "concat", {expr(Prim::Str, d)}, Prim::Str);
          }
          case 4: return builtin_call("String", {expr(Prim::Num, d)}, Prim::Str);
          case 5: {
            NodeId r = expr(Prim::Num, d);
            return method_call(r, "toFixed", {expr(Prim::Num, d)}, Prim::Str);
          }
          case 6: return method_call(expr(Prim::Num, d), "toString", {}, Prim::Str);
          default: return method_call(expr(Prim::Bool, d), "toString", {}, Prim::Str);
        }
      case Prim::Bool:
        switch (uniform(0, 5)) {
          case 0: {
            static const std::vector<std::string> ops = {"<", ">", "<=", ">="};
            Prim operand = chance(0.7) ? Prim::Num : Prim::Str;
            NodeId a = expr(operand, d);
            return binary(pick(ops), a, expr(operand, d), Prim::Bool);
          }
          case 1: {
            static const std::vector<std::string> ops = {"==", "!=", "===", "!=="};
            Prim operand = random_value_prim();
            NodeId a = expr(operand, d);
            return binary(pick(ops), a, expr(operand, d), Prim::Bool);
          }
          case 2: {
            NodeId a = expr(Prim::Bool, d);
            return binary(chance(0.5) ? "&&" : "||", a, expr(Prim::Bool, d), Prim::Bool);
          }
          case 3: return builtin_call("isNaN", {expr(Prim::Num, d)}, Prim::Bool);
          default: {
            NodeId r = expr(Prim::Str, d);
            return method_call(r, chance(0.5) ? "startsWith" : "includes", {expr(Prim::Str, d)}, Prim::Bool);
          }
        }
      case Prim::Void: break;
    }
    throw std::logic_error("generator: no compound of type void");
  }

  NodeId object_literal(GType& t, const std::vector<Field>* shape) {
    std::vector<NodeId> props;
    if (shape) {
      t.fields = *shape;
    } else {
      int nf = uniform(1, 3);
      std::set<std::string> used;
      for (int i = 0; i < nf; ++i) {
        Prim p = random_value_prim();
        const auto& pool = p == Prim::Str ? kStrFields : p == Prim::Num ? kNumFields : kBoolFields;
        const std::string& name = pick(pool);
        if (!used.insert(name).second) continue;
        t.fields.push_back({name, p});
      }
    }
    for (const auto& f : t.fields) props.push_back(add_typed(NodeKind::Property, f.name, {expr(f.type, 1)}, prim_label(f.type)));
    std::sort(t.fields.begin(), t.fields.end(), [](const Field& a, const Field& b) { return a.name < b.name; });
    return add_typed(NodeKind::ObjectLit, "", std::move(props), TypeLabel::Unk);
  }

  NodeId assign(const std::string& name, NodeId rhs, TypeLabel t) {
    NodeId target = add_typed(NodeKind::Identifier, name, {}, t);
    return add(NodeKind::Assign, "=", {target, rhs});
  }

  NodeId new_variable() {
    GType t;
    NodeId rhs;
    int kind = uniform(0, 19);
    if (kind == 0 && !fns_.empty() && !in_function_) {
      const UserFn& f = pick(fns_);
      t.tag = GType::Tag::Func;
      t.prim = f.ret;
      t.params = f.params;
      rhs = add_typed(NodeKind::Identifier, f.name, {}, fn_label(f.ret));
    } else if (kind <= 2) {
      t.tag = GType::Tag::Obj;
      rhs = object_literal(t, nullptr);
    } else {
      t.prim = random_value_prim();
      rhs = expr(t.prim, 0);
    }
    std::string name = fresh(pool_for(t));
    TypeLabel label = t.tag == GType::Tag::Prim ? prim_label(t.prim)
                      : t.tag == GType::Tag::Func ? fn_label(t.prim)
                                                  : TypeLabel::Unk;
    NodeId stmt = assign(name, rhs, label);
    scope().push_back({name, t});
    return stmt;
  }

  NodeId reassignment() {
    std::vector<const Var*> cands;
    for (const auto& v : scope())
      if (v.type.tag != GType::Tag::Func) cands.push_back(&v);
    if (cands.empty()) return new_variable();
    Var v = *pick(cands);
    NodeId rhs;
    TypeLabel label = TypeLabel::Unk;
    if (v.type.tag == GType::Tag::Obj) {
      GType t;
      t.tag = GType::Tag::Obj;
      rhs = object_literal(t, &v.type.fields);
      if (!same_type(t, v.type)) throw std::logic_error("generator: object reassignment changed shape");
    } else {
      rhs = expr(v.type.prim, 0);
      label = prim_label(v.type.prim);
    }
    return assign(v.name, rhs, label);
  }

  NodeId void_call() {
    auto voids = fns_returning(Prim::Void);
    if (!voids.empty() && chance(0.5)) return user_call(*pick(voids), 0);
    return builtin_call(chance(0.7) ? "print" : "alert", {expr(Prim::Str, 1)}, Prim::Void);
  }

  NodeId statement() {
    int r = uniform(0, 19);
    if (r < 12) return new_variable();
    if (r < 15) return reassignment();
    if (r < 18) return void_call();
    return expr(random_value_prim(), 0);
  }

  NodeId top_statement() { return statement(); }

  NodeId function() {
    static const std::vector<Prim> rets = {Prim::Str, Prim::Num, Prim::Bool, Prim::Void};
    Prim ret = pick(rets);
    const auto& pool = ret == Prim::Str ? kStrFns : ret == Prim::Num ? kNumFns : ret == Prim::Bool ? kBoolFns : kVoidFns;
    std::string name = fresh(pool);
    in_function_ = true;
    locals_.clear();
    std::vector<NodeId> ch;
    std::vector<Prim> params;
    int np = uniform(0, cfg_.max_params);
    for (int i = 0; i < np; ++i) {
      Prim p = random_value_prim();
      GType t;
      t.prim = p;
      std::string pname = fresh(pool_for(t));
      NodeId pid = add_typed(NodeKind::Param, pname, {}, prim_label(p));
      param_env_[pid] = prim_label(p);
      ch.push_back(pid);
      params.push_back(p);
      locals_.push_back({pname, t});
    }
    std::vector<NodeId> body;
    int nb = uniform(ret == Prim::Void ? 1 : 0, 2);
    for (int i = 0; i < nb; ++i) body.push_back(statement());
    if (ret != Prim::Void) body.push_back(add(NodeKind::Return, "", {expr(ret, 0)}));
    else if (chance(0.3)) body.push_back(add(NodeKind::Return, ""));
    ch.push_back(add(NodeKind::Block, "", std::move(body)));
    NodeId fn = add_typed(NodeKind::Function, name, std::move(ch), fn_label(ret));
    in_function_ = false;
    locals_.clear();
    fns_.push_back({name, params, ret});
    return fn;
  }

  // Reparses the printed program so ids follow pre-order and spans are real.
  GeneratedProgram finish() {
    GeneratedProgram out;
    out.program = parse(print(prog_));
    auto pairs = match_preorder(prog_, out.program);
    if (pairs.size() != prog_.size()) throw std::logic_error("generator: printed program is not isomorphic");
    for (auto [from, to] : pairs) {
      if (auto it = types_.find(from); it != types_.end()) out.types[to] = it->second;
      if (auto it = param_env_.find(from); it != param_env_.end()) out.params[to] = it->second;
    }
    return out;
  }

  std::mt19937_64 rng_;
  GeneratorConfig cfg_;
  Program prog_;
  TypeMap types_;
  ParamEnv param_env_;
  std::vector<Var> globals_;
  std::vector<Var> locals_;
  std::vector<UserFn> fns_;
  bool in_function_ = false;
};

}  // namespace

GeneratedProgram generate_program(std::uint64_t seed, const GeneratorConfig& config) {
  config.validate();
  return Generator(seed, config).run();
}

}  // namespace rct
