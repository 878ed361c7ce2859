#include <algorithm>
#include <set>

#include "rct/pipeline.hpp"

namespace rct {

const char* verify_status_name(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::Verified: return "VERIFIED";
    case VerifyStatus::Counterexample: return "COUNTEREXAMPLE";
    case VerifyStatus::UnverifiedBudget: return "UNVERIFIED-budget";
  }
  return "?";
}

std::vector<std::string> rename_candidates(const Program& p, const Vocabulary& vocab) {
  auto names = program_names(p);
  std::set<std::string, std::less<>> used(names.begin(), names.end());
  std::vector<std::string> out;
  for (const std::string& w : vocab.corpus_words())
    if (!used.count(w) && usable_rename(w)) out.push_back(w);
  std::string oov = "renamed";
  for (int i = 0; vocab.contains(oov) || used.count(oov) || !usable_rename(oov); ++i) oov = "renamed" + std::to_string(i);
  out.push_back(oov);
  return out;
}

std::vector<bool> dependency_cone(const Graph& g, NodeId position, int steps) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<int>> in(n);
  for (const Edge& e : g.edges) in[static_cast<std::size_t>(e.dst)].push_back(e.src);
  std::vector<bool> cone(n, false);
  std::vector<int> frontier{position};
  cone[static_cast<std::size_t>(position)] = true;
  for (int s = 0; s < steps && !frontier.empty(); ++s) {
    std::vector<int> next;
    for (int v : frontier)
      for (int u : in[static_cast<std::size_t>(v)])
        if (!cone[static_cast<std::size_t>(u)]) {
          cone[static_cast<std::size_t>(u)] = true;
          next.push_back(u);
        }
    frontier = std::move(next);
  }
  return cone;
}

VerifyResult exhaustive_verify_renamings(const ModelBundle& b, const Vocabulary& vocab, const AttackTarget& t,
                                         std::size_t sample, std::size_t max_enumerations) {
  const Program& p = *t.program;
  const NodeId position = t.positions.at(sample);
  const int label = t.labels.at(sample);
  VerifyResult r;

  Graph g = model_input(p, t.annotations, b.alpha, vocab);
  auto cone = dependency_cone(g, position, b.model->config.steps);
  r.cone_nodes = static_cast<std::size_t>(std::count(cone.begin(), cone.end(), true));

  // A rename rewrites its occurrences and the Call nodes they name.
  BindingInfo info = resolve_bindings(p, BuiltinTable::standard());
  auto parents = p.parents();
  std::vector<const Binding*> vars;
  for (const Binding& bind : info.bindings) {
    if (bind.kind == BindingKind::Function) continue;
    bool touches = false;
    for (NodeId occ : bind.occurrences) {
      NodeId par = parents[static_cast<std::size_t>(occ)];
      touches |= cone[static_cast<std::size_t>(occ)];
      touches |= par != kNoNode && p.node(par).kind == NodeKind::Call && cone[static_cast<std::size_t>(par)];
    }
    if (touches) vars.push_back(&bind);
  }
  auto names = rename_candidates(p, vocab);
  r.variables = vars.size();
  r.names = names.size();

  auto bad = [&](int pred) { return pred != kAbstain && pred != label; };
  const int original = b.predict(p, t.annotations, vocab, {position})[0];
  if (bad(original)) {
    r.status = VerifyStatus::Counterexample;
    r.counterexample = Counterexample{t.id, position, {}, original, label};
    return r;
  }
  if (vars.size() * names.size() > max_enumerations) {
    r.status = VerifyStatus::UnverifiedBudget;
    return r;
  }
  for (const Binding* bind : vars) {
    for (const std::string& name : names) {
      Modification m;
      m.kind = ModKind::Rename;
      m.node = bind->decl;
      m.binding = bind->kind;
      m.from = bind->name;
      m.to = name;
      Program q = p;
      if (!apply_modification(q, m)) continue;
      ++r.enumerated;
      const int pred = b.predict(q, t.annotations, vocab, {position})[0];
      if (bad(pred)) {
        r.status = VerifyStatus::Counterexample;
        r.counterexample = Counterexample{t.id, position, {m}, pred, label};
        return r;
      }
    }
  }
  r.status = VerifyStatus::Verified;
  return r;
}

}  // namespace rct
