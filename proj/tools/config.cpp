#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <ostream>
#include <set>

namespace rct::cli {

namespace {

std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
  return s;
}

template <class T>
bool parse_number(const std::string& s, T* out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, *out);
  return ec == std::errc() && p == end;
}

bool valid(Config::Kind kind, const std::string& v) {
  long long i;
  std::uint64_t u;
  double d;
  switch (kind) {
    case Config::Kind::Int: return parse_number(v, &i);
    case Config::Kind::UInt: return parse_number(v, &u);
    case Config::Kind::Real: return parse_number(v, &d) && std::isfinite(d);
    case Config::Kind::Text: return true;
  }
  return false;
}

const char* kind_name(Config::Kind k) {
  switch (k) {
    case Config::Kind::Int: return "an integer";
    case Config::Kind::UInt: return "a non-negative integer";
    case Config::Kind::Real: return "a number";
    case Config::Kind::Text: return "text";
  }
  return "?";
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string env_name(const std::string& key) {
  std::string out = "RCT_";
  for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

Config::Config() {
  using K = Kind;
  define("seed", K::UInt, "0", "root seed; every random stream derives from it");
  define("threads", K::Int, "1", "evaluation workers, 0 for all cores");
  define("log_level", K::Text, "info", "quiet, warn, info or debug");

  define("corpus_programs", K::Int, "200", "programs written by gen-corpus");
  define("gen_min_statements", K::Int, "5", "statements per generated program, lower bound");
  define("gen_max_statements", K::Int, "10", "statements per generated program, upper bound");
  define("gen_max_functions", K::Int, "2", "helper functions per generated program");
  define("gen_max_params", K::Int, "3", "parameters per generated function");
  define("gen_max_depth", K::Int, "3", "expression depth");
  define("gen_hinted_name_prob", K::Real, "0.8", "probability that a generated name hints at its type");

  define("split_train", K::Real, "0.8", "training share of programs");
  define("split_valid", K::Real, "0.1", "validation share of programs");
  define("split_test", K::Real, "0.1", "test share of programs");
  define("dedup_threshold", K::Real, "0.7", "token 3-gram Jaccard similarity treated as duplicate");
  define("min_tokens", K::Int, "20", "programs with fewer tokens are dropped");
  define("max_tokens", K::Int, "600", "programs with more tokens are dropped");
  define("vocab_min_count", K::Int, "1", "training-split frequency for a word to enter the vocabulary");

  define("embed", K::Int, "128", "node embedding width");
  define("hidden", K::Int, "128", "feed-forward inner width");
  define("steps", K::Int, "4", "message passing steps");
  define("dropout", K::Real, "0.1", "dropout rate");
  define("batch", K::Int, "32", "programs per batch");
  define("epochs", K::Int, "10", "epochs of standard or abstain training");
  define("anneal_n", K::Int, "-1", "annealing start epoch, -1 for ceil(epochs/4)");
  define("anneal_k", K::Int, "-1", "annealing length, -1 for ceil(epochs/2)");

  define("attack_budget", K::Int, "20", "sequences per sample during adversarial training");
  define("eval_budget", K::Int, "230", "sequences per sample during evaluation");
  define("attack_max_length", K::Int, "8", "modifications per sequence");
  define("attack_epsilon", K::Real, "0.01", "floor added to attribution when picking positions");

  define("t_acc", K::Real, "1.0", "target accuracy of the multi-model pipeline");
  define("eps_acc", K::Real, "0.02", "slack below t_acc used while training");
  define("adversarial_epochs", K::Int, "5", "adversarial epochs per refinement");
  define("max_refinements", K::Int, "0", "refinements per model, 0 until the abstraction stops shrinking");
  define("max_models", K::Int, "0", "models of the pipeline, 0 until nothing is claimed");

  define("refine_threshold", K::Real, "0.05", "attribution above which a node must stay connected");
  define("refine_max_samples", K::Int, "2000", "samples per refinement problem");
  define("solver_exact_features", K::Int, "64", "largest feature count solved exactly");
  define("solver_exact_supply", K::Int, "10000", "largest per-sample demand solved exactly");
  define("solver_node_limit", K::Int, "20000", "branch-and-bound node limit");

  define("verify_max_enumerations", K::Int, "100000", "renamings tried per sample before giving up");
}

void Config::define(const std::string& key, Kind kind, std::string value, std::string doc) {
  entries_[key] = Entry{kind, std::move(value), "default", std::move(doc)};
  order_.push_back(key);
}

const Config::Entry& Config::at(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::logic_error("config: undefined key " + key);
  return it->second;
}

void Config::set(const std::string& key, const std::string& value, const std::string& source) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw UsageError(source + ": unknown config key '" + key + "'");
  const std::string v = trim(value);
  if (!valid(it->second.kind, v))
    throw UsageError(source + ": " + key + " must be " + kind_name(it->second.kind) + ", got '" + value + "'");
  it->second.value = v;
  it->second.source = source;
}

void Config::load_stream(std::istream& in, const std::string& source) {
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw UsageError(where + ": expected key=value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1), where);
  }
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  load_stream(in, path.string());
}

void Config::apply_env(const std::vector<std::string>& environment) {
  std::map<std::string, std::string> known;
  for (const auto& k : order_) known[env_name(k)] = k;
  for (const std::string& e : environment) {
    const auto eq = e.find('=');
    const std::string name = e.substr(0, eq);
    if (name.rfind("RCT_", 0) != 0) continue;
    auto it = known.find(name);
    if (it == known.end()) throw UsageError("environment: unknown config variable " + name);
    set(it->second, eq == std::string::npos ? "" : e.substr(eq + 1), name);
  }
}

long long Config::integer(const std::string& key) const {
  long long v = 0;
  parse_number(at(key).value, &v);
  return v;
}

std::uint64_t Config::uinteger(const std::string& key) const {
  std::uint64_t v = 0;
  parse_number(at(key).value, &v);
  return v;
}

double Config::real(const std::string& key) const {
  double v = 0;
  parse_number(at(key).value, &v);
  return v;
}

const std::string& Config::text(const std::string& key) const { return at(key).value; }
const std::string& Config::source(const std::string& key) const { return at(key).source; }

std::vector<std::string> Config::keys() const { return order_; }

void Config::dump(std::ostream& out) const {
  for (const auto& k : order_) {
    const Entry& e = entries_.at(k);
    out << k << '=' << e.value << "  # " << e.source << '\n';
  }
}

std::uint64_t Config::stream(const std::string& name) const {
  return splitmix64(uinteger("seed") ^ fnv1a64(name));
}

GeneratorConfig Config::generator() const {
  GeneratorConfig g;
  g.min_statements = static_cast<int>(integer("gen_min_statements"));
  g.max_statements = static_cast<int>(integer("gen_max_statements"));
  g.max_functions = static_cast<int>(integer("gen_max_functions"));
  g.max_params = static_cast<int>(integer("gen_max_params"));
  g.max_depth = static_cast<int>(integer("gen_max_depth"));
  g.hinted_name_prob = real("gen_hinted_name_prob");
  g.validate();
  return g;
}

BuildOptions Config::build_options() const {
  BuildOptions b;
  b.ratios.train = real("split_train");
  b.ratios.valid = real("split_valid");
  b.ratios.test = real("split_test");
  b.ratios.validate();
  b.seed = stream("split");
  b.dedup_threshold = real("dedup_threshold");
  b.min_tokens = static_cast<int>(integer("min_tokens"));
  b.max_tokens = static_cast<int>(integer("max_tokens"));
  return b;
}

ModelConfig Config::model() const {
  ModelConfig m;
  m.embed = static_cast<int>(integer("embed"));
  m.hidden = static_cast<int>(integer("hidden"));
  m.steps = static_cast<int>(integer("steps"));
  m.dropout = real("dropout");
  m.batch = static_cast<int>(integer("batch"));
  m.epochs = static_cast<int>(integer("epochs"));
  m.anneal_n = static_cast<int>(integer("anneal_n"));
  m.anneal_k = static_cast<int>(integer("anneal_k"));
  m.seed = stream("init");
  m.validate();
  return m;
}

RefineOptions Config::refine() const {
  RefineOptions r;
  r.threshold = real("refine_threshold");
  const long long ms = integer("refine_max_samples");
  if (ms <= 0) throw UsageError("refine_max_samples must be positive");
  r.max_samples = static_cast<std::size_t>(ms);
  r.seed = stream("refine");
  const long long ef = integer("solver_exact_features");
  if (ef < 0) throw UsageError("solver_exact_features must be >= 0");
  r.solver.exact_feature_limit = static_cast<std::size_t>(ef);
  r.solver.exact_supply_limit = integer("solver_exact_supply");
  r.solver.node_limit = static_cast<long>(integer("solver_node_limit"));
  return r;
}

AttackConfig Config::attack(const Vocabulary& vocab, const std::vector<const Program*>& programs,
                            const std::string& budget_key) const {
  AttackConfig a;
  a.budget = static_cast<int>(integer(budget_key));
  a.max_length = static_cast<int>(integer("attack_max_length"));
  a.epsilon = real("attack_epsilon");
  a.names = rename_pool(vocab);
  a.strings = string_pool(programs);
  a.seed = stream("attack");
  a.threads = static_cast<int>(integer("threads"));
  a.validate();
  return a;
}

PipelineConfig Config::pipeline(const Vocabulary& vocab, const std::vector<const Program*>& programs) const {
  PipelineConfig p;
  p.model = model();
  p.attack = attack(vocab, programs, "attack_budget");
  p.refine = refine();
  p.t_acc = schedule_for(real("t_acc"));
  p.eps_acc = real("eps_acc");
  p.adversarial_epochs = static_cast<int>(integer("adversarial_epochs"));
  p.max_refinements = static_cast<int>(integer("max_refinements"));
  p.max_models = static_cast<int>(integer("max_models"));
  p.validate();
  return p;
}

std::vector<std::string> string_pool(const std::vector<const Program*>& programs) {
  std::set<std::string> s{"", "a", "text", "hello world", "#00ff00", "0x2a"};
  for (const Program* p : programs)
    for (const auto& n : p->nodes)
      if (n.kind == NodeKind::StringLit) s.insert(n.value);
  return {s.begin(), s.end()};
}

}  // namespace rct::cli
