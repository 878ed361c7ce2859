#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "rct/adversary.hpp"

namespace rct {

namespace {

using nlohmann::json;

const char* mod_kind_name(ModKind k) {
  switch (k) {
    case ModKind::Rename: return "rename";
    case ModKind::FieldRename: return "field";
    case ModKind::Constant: return "constant";
    case ModKind::Wrap: return "wrap";
  }
  return "?";
}

const char* binding_kind_name(BindingKind k) {
  switch (k) {
    case BindingKind::Variable: return "variable";
    case BindingKind::Parameter: return "parameter";
    case BindingKind::Function: return "function";
  }
  return "?";
}

bool is_literal(NodeKind k) { return k == NodeKind::NumberLit || k == NodeKind::StringLit || k == NodeKind::BoolLit; }

bool is_expression(NodeKind k) {
  switch (k) {
    case NodeKind::BinaryExpr:
    case NodeKind::Ternary:
    case NodeKind::Call:
    case NodeKind::Member:
    case NodeKind::Identifier:
    case NodeKind::NumberLit:
    case NodeKind::StringLit:
    case NodeKind::BoolLit:
      return true;
    default:
      return false;
  }
}

bool is_primitive(TypeLabel t) { return t == TypeLabel::String || t == TypeLabel::Number || t == TypeLabel::Boolean; }

bool is_identifier_word(std::string_view w) {
  if (w.empty() || !(std::isalpha(static_cast<unsigned char>(w[0])) || w[0] == '_' || w[0] == '$')) return false;
  return std::all_of(w.begin(), w.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; });
}

bool reserved_name(std::string_view w) {
  const auto& b = BuiltinTable::standard();
  return is_keyword(w) || b.is_builtin_function(w) || b.is_member_name(w);
}

// Child slot of `id` in its parent, or -1.
int child_slot(const Program& p, NodeId parent, NodeId id) {
  if (parent == kNoNode) return -1;
  const auto& ch = p.node(parent).children;
  auto it = std::find(ch.begin(), ch.end(), id);
  return it == ch.end() ? -1 : static_cast<int>(it - ch.begin());
}

bool is_callee(const Program& p, NodeId parent, NodeId id) {
  return parent != kNoNode && p.node(parent).kind == NodeKind::Call && child_slot(p, parent, id) == 0;
}

NodeId clone_subtree(Program& dst, const Program& src, NodeId id) {
  const AstNode& n = src.node(id);
  std::vector<NodeId> kids;
  for (NodeId c : n.children) kids.push_back(clone_subtree(dst, src, c));
  return dst.add(n.kind, n.value, std::move(kids));
}

std::string fresh_name(const Program& p, const std::vector<std::string>& pool, std::mt19937_64& rng) {
  if (pool.empty()) return {};
  auto names = program_names(p);
  std::set<std::string, std::less<>> used(names.begin(), names.end());
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int attempt = 0; attempt < 32; ++attempt) {
    const std::string& w = pool[pick(rng)];
    if (!used.count(w) && !reserved_name(w) && is_identifier_word(w)) return w;
  }
  // Dense pools: scan from a random offset.
  std::size_t start = pick(rng);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::string& w = pool[(start + i) % pool.size()];
    if (!used.count(w) && !reserved_name(w) && is_identifier_word(w)) return w;
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------

bool usable_rename(std::string_view w) { return is_identifier_word(w) && !reserved_name(w); }

std::string Modification::to_json() const {
  json j;
  j["op"] = mod_kind_name(kind);
  switch (kind) {
    case ModKind::Rename:
      j["node"] = node;
      j["binding"] = binding_kind_name(binding);
      j["from"] = from;
      j["to"] = to;
      break;
    case ModKind::FieldRename:
      j["from"] = from;
      j["to"] = to;
      break;
    case ModKind::Constant:
      j["node"] = node;
      j["to"] = to;
      break;
    case ModKind::Wrap:
      j["node"] = node;
      j["cond"] = cond;
      break;
  }
  return j.dump();
}

namespace {
Modification mod_from(const json& j) {
  Modification m;
  std::string op = j.at("op").get<std::string>();
  if (op == "rename") {
    m.kind = ModKind::Rename;
    m.node = j.at("node").get<NodeId>();
    std::string b = j.at("binding").get<std::string>();
    if (b == "variable") m.binding = BindingKind::Variable;
    else if (b == "parameter") m.binding = BindingKind::Parameter;
    else throw std::invalid_argument("modification: unknown binding kind '" + b + "'");
    m.from = j.at("from").get<std::string>();
    m.to = j.at("to").get<std::string>();
  } else if (op == "field") {
    m.kind = ModKind::FieldRename;
    m.from = j.at("from").get<std::string>();
    m.to = j.at("to").get<std::string>();
  } else if (op == "constant") {
    m.kind = ModKind::Constant;
    m.node = j.at("node").get<NodeId>();
    m.to = j.at("to").get<std::string>();
  } else if (op == "wrap") {
    m.kind = ModKind::Wrap;
    m.node = j.at("node").get<NodeId>();
    m.cond = j.at("cond").get<std::string>();
  } else {
    throw std::invalid_argument("modification: unknown op '" + op + "'");
  }
  return m;
}
}  // namespace

Modification Modification::from_json(const std::string& text) {
  try {
    return mod_from(json::parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("modification: ") + e.what());
  }
}

std::string delta_to_json(const DeltaSeq& d) {
  json arr = json::array();
  for (const auto& m : d) arr.push_back(json::parse(m.to_json()));
  return arr.dump();
}

DeltaSeq delta_from_json(const std::string& text) {
  DeltaSeq d;
  try {
    json arr = json::parse(text);
    if (!arr.is_array()) throw std::invalid_argument("modification list must be a JSON array");
    for (const auto& j : arr) d.push_back(mod_from(j));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("modification list: ") + e.what());
  }
  return d;
}

// ---------------------------------------------------------------------------

bool apply_modification(Program& p, const Modification& m) {
  const auto& builtins = BuiltinTable::standard();
  auto valid_node = [&](NodeId id) { return id >= 0 && static_cast<std::size_t>(id) < p.size(); };
  switch (m.kind) {
    case ModKind::Rename: {
      if (!is_identifier_word(m.to) || reserved_name(m.to)) return false;
      BindingInfo info = resolve_bindings(p, builtins);
      auto it = std::find_if(info.bindings.begin(), info.bindings.end(), [&](const Binding& b) {
        return b.decl == m.node && b.name == m.from && b.kind == m.binding;
      });
      if (it == info.bindings.end()) return false;
      auto names = program_names(p);
      if (std::find(names.begin(), names.end(), m.to) != names.end()) return false;
      auto parents = p.parents();
      for (NodeId occ : it->occurrences) {
        p.node(occ).value = m.to;
        NodeId par = parents[static_cast<std::size_t>(occ)];
        if (is_callee(p, par, occ)) p.node(par).value = m.to;
      }
      return true;
    }
    case ModKind::FieldRename: {
      if (!is_identifier_word(m.to) || reserved_name(m.to) || builtins.is_member_name(m.from)) return false;
      auto names = program_names(p);
      if (std::find(names.begin(), names.end(), m.to) != names.end()) return false;
      auto parents = p.parents();
      std::vector<NodeId> hits;
      for (NodeId id : p.preorder()) {
        const AstNode& n = p.node(id);
        if ((n.kind == NodeKind::Property || n.kind == NodeKind::Member) && n.value == m.from) hits.push_back(id);
      }
      if (hits.empty()) return false;
      for (NodeId id : hits) {
        p.node(id).value = m.to;
        NodeId par = parents[static_cast<std::size_t>(id)];
        if (is_callee(p, par, id)) p.node(par).value = m.to;
      }
      return true;
    }
    case ModKind::Constant: {
      if (!valid_node(m.node)) return false;
      AstNode& n = p.node(m.node);
      if (n.kind == NodeKind::BoolLit) {
        if (m.to != "true" && m.to != "false") return false;
      } else if (n.kind == NodeKind::NumberLit) {
        auto toks = tokenize(m.to);
        if (toks.size() != 2 || toks[0].kind != TokenKind::Number) return false;
      } else if (n.kind != NodeKind::StringLit) {
        return false;
      }
      n.value = m.to;
      return true;
    }
    case ModKind::Wrap: {
      if (!valid_node(m.node)) return false;
      auto parents = p.parents();
      NodeId par = parents[static_cast<std::size_t>(m.node)];
      if (par == kNoNode || !is_expression(p.node(m.node).kind) || is_callee(p, par, m.node)) return false;
      Program cond;
      try {
        cond = parse_expression(m.cond);
      } catch (const SyntaxError&) {
        return false;
      }
      int slot = child_slot(p, par, m.node);
      NodeId c = clone_subtree(p, cond, cond.root);
      NodeId copy = clone_subtree(p, p, m.node);
      NodeId t = p.add(NodeKind::Ternary, "?", {c, m.node, copy});
      p.node(par).children[static_cast<std::size_t>(slot)] = t;
      return true;
    }
  }
  return false;
}

Program apply_delta(const Program& p, const DeltaSeq& d, std::size_t* applied) {
  Program out = p;
  std::size_t n = 0;
  for (const auto& m : d) {
    if (!apply_modification(out, m)) break;
    ++n;
  }
  if (applied) *applied = n;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ModSite> modification_sites(const Program& p, const TypeMap& types) {
  const auto& builtins = BuiltinTable::standard();
  BindingInfo info = resolve_bindings(p, builtins);
  auto parents = p.parents();
  std::vector<ModSite> sites;
  for (NodeId id : p.preorder()) {
    const AstNode& n = p.node(id);
    NodeId par = parents[static_cast<std::size_t>(id)];
    auto b = info.binding_of.find(id);
    if (b != info.binding_of.end() && info.bindings[b->second].kind != BindingKind::Function)
      sites.push_back({id, ModKind::Rename});
    if ((n.kind == NodeKind::Property || n.kind == NodeKind::Member) && !builtins.is_member_name(n.value))
      sites.push_back({id, ModKind::FieldRename});
    if (is_literal(n.kind)) sites.push_back({id, ModKind::Constant});
    if (par != kNoNode && is_expression(n.kind) && !is_callee(p, par, id) &&
        !(p.node(par).kind == NodeKind::Assign && child_slot(p, par, id) == 0)) {
      auto t = types.find(id);
      if (t != types.end() && is_primitive(t->second)) sites.push_back({id, ModKind::Wrap});
    }
  }
  std::sort(sites.begin(), sites.end(), [](const ModSite& a, const ModSite& b) {
    return a.node != b.node ? a.node < b.node : a.kind < b.kind;
  });
  return sites;
}

void AttackConfig::validate() const {
  if (budget <= 0 || max_length <= 0) throw std::invalid_argument("attack: budget and max length must be positive");
  if (epsilon < 0) throw std::invalid_argument("attack: epsilon must be non-negative");
  if (threads < 0) throw std::invalid_argument("attack: threads must be >= 0");
}

const std::vector<std::string>& fixed_rename_words() {
  static const std::vector<std::string> words = {
      "color",  "alpha",   "beta",   "gamma",  "delta",  "omega",  "sigma",   "theta",  "kappa",   "lambda", "apple",
      "banana", "cherry",  "grape",  "lemon",  "mango",  "olive",  "peach",   "river",  "stone",   "cloud",  "storm",
      "forest", "meadow",  "harbor", "canyon", "island", "valley", "falcon",  "otter",  "badger",  "heron",  "lynx",
      "raven",  "tiger",   "zebra",  "anchor", "bridge", "candle", "dagger",  "engine", "feather", "goblet", "hammer",
      "jigsaw", "kettle",  "ladder", "magnet", "needle", "pencil", "quiver",  "rocket", "saddle",  "tunnel", "umbrella",
      "violin", "wagon",   "yarn",   "zephyr", "orbit",  "pixel",  "quartz",  "ember",  "nimbus"};
  return words;
}

std::vector<std::string> rename_pool(const Vocabulary& vocab) {
  std::vector<std::string> pool = fixed_rename_words();
  std::set<std::string> seen(pool.begin(), pool.end());
  for (const auto& w : vocab.corpus_words())
    if (is_identifier_word(w) && !reserved_name(w) && seen.insert(w).second) pool.push_back(w);
  return pool;
}

PositionSampler::PositionSampler(std::vector<NodeId> nodes, const std::vector<double>& weights, double epsilon)
    : nodes_(std::move(nodes)) {
  double total = 0;
  for (NodeId n : nodes_) {
    double w = weights.empty() ? 0.0 : weights.at(static_cast<std::size_t>(n));
    probs_.push_back(w + epsilon);
    total += w + epsilon;
  }
  for (double& p : probs_) p = total > 0 ? p / total : 1.0 / static_cast<double>(probs_.size());
  double acc = 0;
  for (double p : probs_) cumulative_.push_back(acc += p);
}

NodeId PositionSampler::draw(std::mt19937_64& rng) const {
  if (nodes_.empty()) throw std::logic_error("position sampler is empty");
  double u = std::uniform_real_distribution<double>(0, cumulative_.back())(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t i = std::min(static_cast<std::size_t>(it - cumulative_.begin()), nodes_.size() - 1);
  return nodes_[i];
}

std::string random_condition(std::mt19937_64& rng, int depth) {
  auto roll = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  static const char* rel[] = {"<", ">", "<=", ">=", "==", "!="};
  static const char* arith[] = {"+", "-", "*"};
  std::function<std::string(int)> num = [&](int d) -> std::string {
    if (d <= 0 || roll(2) == 0) return std::to_string(roll(100));
    return "(" + num(d - 1) + " " + arith[roll(3)] + " " + num(d - 1) + ")";
  };
  std::function<std::string(int)> boolean = [&](int d) -> std::string {
    if (d <= 1 || roll(2) == 0) return num(0) + " " + rel[roll(6)] + " " + num(0);
    if (roll(2) == 0) return num(d - 2) + " " + rel[roll(6)] + " " + num(d - 2);
    return "(" + boolean(d - 1) + ") " + (roll(2) ? "&&" : "||") + " (" + boolean(d - 1) + ")";
  };
  return boolean(std::uniform_int_distribution<int>(1, std::max(1, depth))(rng));
}

std::optional<Modification> instantiate(const Program& current, const ModSite& site, const AttackConfig& cfg,
                                        std::mt19937_64& rng) {
  const AstNode& n = current.node(site.node);
  Modification m;
  m.kind = site.kind;
  switch (site.kind) {
    case ModKind::Rename: {
      BindingInfo info = resolve_bindings(current, BuiltinTable::standard());
      auto b = info.binding_of.find(site.node);
      if (b == info.binding_of.end()) return std::nullopt;
      const Binding& bind = info.bindings[b->second];
      if (bind.kind == BindingKind::Function) return std::nullopt;
      m.node = bind.decl;
      m.binding = bind.kind;
      m.from = bind.name;
      m.to = fresh_name(current, cfg.names, rng);
      if (m.to.empty()) return std::nullopt;
      return m;
    }
    case ModKind::FieldRename:
      m.from = n.value;
      m.to = fresh_name(current, cfg.names, rng);
      if (m.to.empty()) return std::nullopt;
      return m;
    case ModKind::Constant:
      m.node = site.node;
      if (n.kind == NodeKind::BoolLit) {
        m.to = n.value == "true" ? "false" : "true";
      } else if (n.kind == NodeKind::NumberLit) {
        do m.to = std::to_string(std::uniform_int_distribution<int>(0, 999)(rng));
        while (m.to == n.value);
      } else {
        const auto& pool = cfg.strings.empty() ? cfg.names : cfg.strings;
        if (pool.empty()) return std::nullopt;
        m.to = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        if (m.to == n.value) m.to += "_";
      }
      return m;
    case ModKind::Wrap:
      m.node = site.node;
      m.cond = random_condition(rng);
      return m;
  }
  return std::nullopt;
}

DeltaSeq sample_delta(const Program& p, const std::vector<ModSite>& sites, const PositionSampler& sampler,
                      const AttackConfig& cfg, std::mt19937_64& rng) {
  DeltaSeq d;
  if (sites.empty() || sampler.nodes().empty()) return d;
  std::map<NodeId, std::vector<ModKind>> kinds;
  for (const auto& s : sites) kinds[s.node].push_back(s.kind);
  int len = std::uniform_int_distribution<int>(1, cfg.max_length)(rng);
  Program cur = p;
  for (int i = 0; i < len; ++i) {
    NodeId node = sampler.draw(rng);
    const auto& ks = kinds.at(node);
    ModKind k = ks[std::uniform_int_distribution<std::size_t>(0, ks.size() - 1)(rng)];
    auto m = instantiate(cur, {node, k}, cfg, rng);
    if (!m) continue;
    if (!apply_modification(cur, *m)) throw std::logic_error("freshly instantiated modification is stale");
    d.push_back(std::move(*m));
  }
  return d;
}

}  // namespace rct
