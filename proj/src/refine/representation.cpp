#include <algorithm>
#include <deque>
#include <random>

#include "rct/log.hpp"
#include "rct/refine.hpp"

namespace rct {

RefineReport refine_representation(const std::vector<AttackTarget>& data, const ModelBundle& bundle,
                                   const Vocabulary& vocab, const RefineOptions& opts) {
  if (!bundle.model) throw std::invalid_argument("refine: bundle without model");
  std::vector<std::pair<std::size_t, std::size_t>> picks;  // target, position index
  for (std::size_t t = 0; t < data.size(); ++t)
    for (std::size_t i = 0; i < data[t].positions.size(); ++i) picks.emplace_back(t, i);
  if (picks.size() > opts.max_samples) {
    std::mt19937_64 rng(splitmix64(opts.seed ^ 0x4ef1eULL));
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(opts.max_samples);
    std::sort(picks.begin(), picks.end());
  }

  RefineReport rep;
  std::deque<Graph> graphs;
  std::vector<FlowInput> inputs;
  inputs.reserve(picks.size());
  for (std::size_t k = 0; k < picks.size();) {
    const std::size_t ti = picks[k].first;
    const AttackTarget& t = data[ti];
    std::vector<NodeId> positions;
    std::vector<std::size_t> idx;
    for (; k < picks.size() && picks[k].first == ti; ++k) {
      idx.push_back(picks[k].second);
      positions.push_back(t.positions[picks[k].second]);
    }
    const Graph& g = graphs.emplace_back(model_input(*t.program, t.annotations, bundle.alpha, vocab));
    const auto predicted = bundle.predict(*t.program, t.annotations, vocab, positions);
    for (std::size_t j = 0; j < positions.size(); ++j) {
      const bool abstained = predicted[j] == kAbstain;
      rep.abstained += abstained ? 1 : 0;
      FlowInput in;
      in.id = t.id + ":" + std::to_string(positions[j]);
      in.graph = &g;
      in.sink = positions[j];
      in.attribution = attribution(*bundle.model, g, positions[j], abstained ? kAbstain : t.labels[idx[j]]);
      inputs.push_back(std::move(in));
    }
  }
  rep.samples = inputs.size();
  rep.problem = build_flow_problem(inputs, opts.threshold);
  for (const auto& id : rep.problem.dropped) log_warn("refine: dropping sample " + id + ", a source cannot reach the sink");
  rep.solution = solve(rep.problem, opts.solver);
  if (!rep.solution.exact) log_warn("refine: " + rep.solution.note);
  rep.alpha = extract_abstraction(rep.problem, rep.solution);
  return rep;
}

}  // namespace rct
