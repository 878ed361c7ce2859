#pragma once

// Reference check for rename verification: every non-function binding of
// the program against every vocabulary word and a handful of words outside
// it, each variant run through the whole model. No dependency cone, no
// name filtering beyond what apply_modification itself rejects.

#include <optional>
#include <string>
#include <vector>

#include "rct/pipeline.hpp"

namespace rct::testing {

struct RenameOracleResult {
  std::size_t variants = 0;
  std::optional<Modification> counterexample;
};

inline RenameOracleResult full_rename_enumeration(const ModelBundle& b, const Vocabulary& vocab,
                                                  const AttackTarget& t, std::size_t sample) {
  const Program& p = *t.program;
  const NodeId position = t.positions.at(sample);
  const int label = t.labels.at(sample);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab.size(); ++i) words.push_back(vocab.word(static_cast<int>(i)));
  for (const char* w : {"oracleA", "oracleB", "zz_outside", "q9"}) words.emplace_back(w);

  RenameOracleResult r;
  BindingInfo info = resolve_bindings(p, BuiltinTable::standard());
  for (const Binding& bind : info.bindings) {
    if (bind.kind == BindingKind::Function) continue;
    for (const std::string& w : words) {
      Modification m;
      m.kind = ModKind::Rename;
      m.node = bind.decl;
      m.binding = bind.kind;
      m.from = bind.name;
      m.to = w;
      Program q = p;
      if (!apply_modification(q, m)) continue;
      ++r.variants;
      const int pred = b.predict(q, t.annotations, vocab, {position})[0];
      if (pred != kAbstain && pred != label && !r.counterexample) r.counterexample = m;
    }
  }
  return r;
}

}  // namespace rct::testing
