#pragma once

#include <deque>
#include <string>
#include <vector>

#include "rct/adversary.hpp"

namespace rct::testing {

// Generated programs with their oracle data, a vocabulary and one attack
// target per program. Storage is stable (deque), so pointers stay valid.
struct ToyCorpus {
  std::deque<GeneratedProgram> programs;
  Vocabulary vocab;
  std::vector<AttackTarget> targets;

  std::size_t samples() const {
    std::size_t n = 0;
    for (const auto& t : targets) n += t.positions.size();
    return n;
  }
};

inline ToyCorpus make_toy(int count, std::uint64_t seed, const GeneratorConfig& cfg = {}) {
  ToyCorpus c;
  for (int i = 0; i < count; ++i) c.programs.push_back(generate_program(seed + static_cast<std::uint64_t>(i), cfg));
  std::vector<const Program*> ptrs;
  for (const auto& g : c.programs) ptrs.push_back(&g.program);
  c.vocab = Vocabulary::build(ptrs, 1);
  for (std::size_t i = 0; i < c.programs.size(); ++i) {
    const auto& g = c.programs[i];
    AttackTarget t;
    t.id = "toy" + std::to_string(i);
    t.program = &g.program;
    t.params = &g.params;
    t.types = &g.types;
    for (auto [id, label] : g.types) {
      t.positions.push_back(id);
      t.labels.push_back(label_index(label));
    }
    c.targets.push_back(std::move(t));
  }
  return c;
}

inline AttackConfig toy_attack(const Vocabulary& vocab, int budget, std::uint64_t seed = 1) {
  AttackConfig a;
  a.budget = budget;
  a.names = rename_pool(vocab);
  a.strings = {"a", "abc", "hello", "zz", "#00ff00", "0x2a", "text", ""};
  a.seed = seed;
  return a;
}

inline ModelConfig tiny_model(std::uint64_t seed = 5) {
  ModelConfig c;
  c.embed = 16;
  c.hidden = 16;
  c.steps = 3;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

}  // namespace rct::testing
