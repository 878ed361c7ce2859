#pragma once

// Reference solver for small flow problems. Shares nothing with the library
// solver: feasibility is the explicit list of node-subset cuts per sample
// (checked at every leaf with Edmonds-Karp as well), and the optimum comes
// from exhaustive search over integer capacity vectors, pruned only by
// bounds that follow from the cut list.

#include <algorithm>
#include <cstdint>
#include <queue>
#include <random>
#include <stdexcept>
#include <vector>

#include "rct/refine.hpp"

namespace rct::testing {

// Edmonds-Karp on an adjacency matrix.
inline std::int64_t ek_max_flow(const FlowSample& s, const std::vector<std::int64_t>& cap) {
  const int n = s.num_nodes + 1;
  const int src = s.num_nodes;
  std::vector<std::vector<std::int64_t>> r(static_cast<std::size_t>(n), std::vector<std::int64_t>(static_cast<std::size_t>(n), 0));
  for (const FlowEdge& e : s.edges) r[static_cast<std::size_t>(e.src)][static_cast<std::size_t>(e.dst)] += cap[static_cast<std::size_t>(e.feature)];
  for (auto [v, x] : s.sources) r[static_cast<std::size_t>(src)][static_cast<std::size_t>(v)] += x;
  std::int64_t total = 0;
  for (;;) {
    std::vector<int> prev(static_cast<std::size_t>(n), -1);
    prev[static_cast<std::size_t>(src)] = src;
    std::queue<int> q;
    q.push(src);
    while (!q.empty() && prev[static_cast<std::size_t>(s.sink)] < 0) {
      int u = q.front();
      q.pop();
      for (int v = 0; v < n; ++v)
        if (prev[static_cast<std::size_t>(v)] < 0 && r[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] > 0) {
          prev[static_cast<std::size_t>(v)] = u;
          q.push(v);
        }
    }
    if (prev[static_cast<std::size_t>(s.sink)] < 0) return total;
    std::int64_t push = INT64_MAX;
    for (int v = s.sink; v != src; v = prev[static_cast<std::size_t>(v)])
      push = std::min(push, r[static_cast<std::size_t>(prev[static_cast<std::size_t>(v)])][static_cast<std::size_t>(v)]);
    for (int v = s.sink; v != src; v = prev[static_cast<std::size_t>(v)]) {
      r[static_cast<std::size_t>(prev[static_cast<std::size_t>(v)])][static_cast<std::size_t>(v)] -= push;
      r[static_cast<std::size_t>(v)][static_cast<std::size_t>(prev[static_cast<std::size_t>(v)])] += push;
    }
    total += push;
  }
}

struct OracleResult {
  std::int64_t objective = 0;
  std::vector<std::int64_t> capacity;
  long leaves = 0;
};

class BruteForceOracle {
 public:
  explicit BruteForceOracle(const FlowProblem& p) : p_(p), n_(p.features.size()) {
    if (n_ > 16) throw std::invalid_argument("oracle: too many features");
    for (const FlowSample& s : p.samples) {
      if (s.num_nodes > 14) throw std::invalid_argument("oracle: sample too large");
      const int others = s.num_nodes;
      for (std::uint32_t mask = 1; mask < (1u << others); ++mask) {
        if (mask & (1u << s.sink)) continue;
        Cut c;
        c.coef.assign(n_, 0);
        for (const FlowEdge& e : s.edges)
          if ((mask >> e.src & 1u) && !(mask >> e.dst & 1u)) ++c.coef[static_cast<std::size_t>(e.feature)];
        for (auto [v, r] : s.sources)
          if (mask >> v & 1u) c.rhs += r;
        if (c.rhs > 0) cuts_.push_back(std::move(c));
      }
      cap_max_ = std::max(cap_max_, s.demand());
    }
  }

  OracleResult run() {
    // Every feature at the largest demand is feasible whenever anything is.
    best_.assign(n_, cap_max_);
    best_cost_ = static_cast<std::int64_t>(n_) * cap_max_ + 1;
    if (!leaf_ok(best_)) throw std::invalid_argument("oracle: infeasible problem");
    best_cost_ = static_cast<std::int64_t>(n_) * cap_max_;
    std::vector<std::int64_t> c(n_, 0);
    dfs(0, 0, c);
    return {best_cost_, best_, leaves_};
  }

 private:
  struct Cut {
    std::vector<int> coef;
    std::int64_t rhs = 0;
  };

  bool leaf_ok(const std::vector<std::int64_t>& c) {
    ++leaves_;
    bool by_cuts = std::all_of(cuts_.begin(), cuts_.end(), [&](const Cut& cut) {
      std::int64_t lhs = 0;
      for (std::size_t q = 0; q < n_; ++q) lhs += cut.coef[q] * c[q];
      return lhs >= cut.rhs;
    });
    bool by_flow = std::all_of(p_.samples.begin(), p_.samples.end(),
                               [&](const FlowSample& s) { return ek_max_flow(s, c) == s.demand(); });
    if (by_cuts != by_flow) throw std::logic_error("oracle: cut list disagrees with max-flow");
    return by_cuts;
  }

  // Lower bound on the cost of features j.. given c[0..j). Cuts whose free
  // features are pairwise disjoint add up.
  std::int64_t bound(std::size_t j, const std::vector<std::int64_t>& c, std::int64_t* need_j) const {
    struct Need {
      std::int64_t amount;
      std::uint32_t mask;
    };
    std::vector<Need> needs;
    *need_j = 0;
    for (const Cut& cut : cuts_) {
      std::int64_t res = cut.rhs;
      for (std::size_t q = 0; q < j; ++q) res -= cut.coef[q] * c[q];
      if (res <= 0) continue;
      int kmax = 0;
      std::uint32_t mask = 0;
      for (std::size_t q = j; q < n_; ++q)
        if (cut.coef[q] > 0) {
          kmax = std::max(kmax, cut.coef[q]);
          mask |= 1u << q;
        }
      if (kmax == 0) return INT64_MAX;  // violated with nothing left to raise
      if (mask == (1u << j)) *need_j = std::max(*need_j, (res + cut.coef[j] - 1) / cut.coef[j]);
      needs.push_back({(res + kmax - 1) / kmax, mask});
    }
    std::sort(needs.begin(), needs.end(), [](const Need& a, const Need& b) { return a.amount > b.amount; });
    std::int64_t total = 0;
    std::uint32_t used = 0;
    for (const Need& nd : needs)
      if (!(nd.mask & used)) {
        total += nd.amount;
        used |= nd.mask;
      }
    return total;
  }

  void dfs(std::size_t j, std::int64_t cost, std::vector<std::int64_t>& c) {
    if (j == n_) {
      if (cost < best_cost_ && leaf_ok(c)) {
        best_cost_ = cost;
        best_ = c;
      }
      return;
    }
    std::int64_t need_j = 0;
    const std::int64_t lb = bound(j, c, &need_j);
    if (lb == INT64_MAX || cost + lb >= best_cost_) return;
    // The last feature only ever needs its forced value.
    const std::int64_t top = j + 1 == n_ ? need_j : cap_max_;
    for (std::int64_t v = need_j; v <= top && cost + v < best_cost_; ++v) {
      c[j] = v;
      dfs(j + 1, cost + v, c);
    }
    c[j] = 0;
  }

  const FlowProblem& p_;
  std::size_t n_;
  std::vector<Cut> cuts_;
  std::int64_t cap_max_ = 0;
  std::vector<std::int64_t> best_;
  std::int64_t best_cost_ = 0;
  long leaves_ = 0;
};

// Random problem with `features` features; every source reaches its sink.
template <class Rng>
FlowProblem random_flow_problem(Rng& rng, int features, int max_supply) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  FlowProblem p;
  for (int q = 0; q < features; ++q) p.features.push_back(EdgeFeature::from_index(q));
  const int samples = uni(1, 6);
  for (int si = 0; si < samples; ++si) {
    FlowSample s;
    s.id = "r" + std::to_string(si);
    s.sink = 0;
    if (uni(0, 1) == 0) {
      // Parallel edges between one source and the sink: covering rows whose
      // relaxation is often fractional. Small odd supplies keep the
      // exhaustive search short.
      s.num_nodes = 2;
      const int k = uni(2, 3);
      for (int e = 0; e < k; ++e) s.edges.push_back({1, 0, uni(0, features - 1)});
      s.sources.emplace_back(1, 2 * uni(0, std::min(7, (max_supply - 1) / 2)) + 1);
      p.samples.push_back(std::move(s));
      continue;
    }
    s.num_nodes = uni(3, 6);
    // Spanning in-tree towards the sink keeps every node connected.
    for (int v = 1; v < s.num_nodes; ++v) s.edges.push_back({v, uni(0, v - 1), uni(0, features - 1)});
    const int extra = uni(0, 5);
    for (int k = 0; k < extra; ++k) {
      int a = uni(0, s.num_nodes - 1), b = uni(0, s.num_nodes - 1);
      if (a != b) s.edges.push_back({a, b, uni(0, features - 1)});
    }
    const int sources = uni(1, std::min(3, s.num_nodes - 1));
    std::vector<int> nodes;
    for (int v = 1; v < s.num_nodes; ++v) nodes.push_back(v);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    // Supplies of one sample add up to at most `max_supply`.
    for (int k = 0; k < sources; ++k)
      s.sources.emplace_back(nodes[static_cast<std::size_t>(k)], uni(1, std::max(1, max_supply / sources)));
    p.samples.push_back(std::move(s));
  }
  return p;
}

}  // namespace rct::testing
