#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "rct/refine.hpp"

namespace rct {

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
  return s;
}

}  // namespace

InfeasibleProblem::InfeasibleProblem(std::vector<std::string> ids)
    : std::runtime_error("infeasible flow problem, samples: " + join_ids(ids)), ids_(std::move(ids)) {}

// ---------------------------------------------------------------------------
// Covering LP through its packing dual
//
//   min 1'c  s.t. A c >= b, c <= u, c >= 0
//   max b'y - u'z  s.t. A'y - z <= 1, y, z >= 0
//
// The dual has a feasible origin, so the slack basis starts the simplex and
// no phase one is needed. The primal solution is read off the reduced costs
// of the slack columns. An unbounded dual means an infeasible primal.

LpResult solve_covering_lp(const CoveringLp& lp) {
  constexpr double kEps = 1e-9;
  const std::size_t n = lp.upper.size();
  const std::size_t m = lp.a.size();
  if (lp.b.size() != m) throw std::invalid_argument("covering lp: b size");
  std::vector<std::size_t> bounded;
  for (std::size_t j = 0; j < n; ++j)
    if (std::isfinite(lp.upper[j])) bounded.push_back(j);
  const std::size_t k = bounded.size();
  const std::size_t cols = m + k + n;
  const std::size_t rhs = cols;

  std::vector<std::vector<double>> t(n, std::vector<double>(cols + 1, 0.0));
  std::vector<double> obj(cols + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (lp.a[i].size() != n) throw std::invalid_argument("covering lp: row width");
    for (std::size_t j = 0; j < n; ++j) t[j][i] = lp.a[i][j];
    obj[i] = -lp.b[i];
  }
  for (std::size_t z = 0; z < k; ++z) {
    t[bounded[z]][m + z] = -1.0;
    obj[m + z] = lp.upper[bounded[z]];
  }
  std::vector<std::size_t> basis(n);
  for (std::size_t j = 0; j < n; ++j) {
    t[j][m + k + j] = 1.0;
    t[j][rhs] = 1.0;
    basis[j] = m + k + j;
  }

  LpResult res;
  bool bland = false;
  int degenerate = 0;
  const long pivot_limit = 50L * static_cast<long>(cols + n) + 10000;
  for (;;) {
    std::size_t enter = cols;
    double best = -kEps;
    for (std::size_t c = 0; c < cols; ++c) {
      if (obj[c] < best) {
        enter = c;
        if (bland) break;
        best = obj[c];
      }
    }
    if (enter == cols) break;

    std::size_t leave = n;
    double ratio = 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (t[r][enter] <= kEps) continue;
      double q = t[r][rhs] / t[r][enter];
      if (leave == n || q < ratio - kEps || (q <= ratio + kEps && basis[r] < basis[leave])) {
        leave = r;
        ratio = q;
      }
    }
    if (leave == n) return res;  // dual unbounded

    if (ratio <= kEps) {
      if (++degenerate > 64) bland = true;
    } else {
      degenerate = 0;
    }
    if (++res.pivots > pivot_limit) throw std::runtime_error("covering lp: pivot limit exceeded");

    auto& pr = t[leave];
    const double pv = pr[enter];
    for (double& v : pr) v /= pv;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == leave) continue;
      const double f = t[r][enter];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols; ++c) t[r][c] -= f * pr[c];
    }
    const double f = obj[enter];
    for (std::size_t c = 0; c <= cols; ++c) obj[c] -= f * pr[c];
    basis[leave] = enter;
  }

  res.feasible = true;
  res.objective = obj[rhs];
  res.x.resize(n);
  for (std::size_t j = 0; j < n; ++j) res.x[j] = std::max(0.0, obj[m + k + j]);
  return res;
}

// ---------------------------------------------------------------------------
// Branch and cut

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTol = 1e-6;

struct Cut {
  std::vector<std::pair<int, int>> coef;  // feature, edge count
  std::int64_t rhs = 0;
};

class CutPool {
 public:
  // Keeps the strongest right-hand side per coefficient pattern.
  bool add(Cut c) {
    std::sort(c.coef.begin(), c.coef.end());
    auto [it, inserted] = index_.emplace(c.coef, cuts_.size());
    if (inserted) {
      cuts_.push_back(std::move(c));
      return true;
    }
    if (cuts_[it->second].rhs >= c.rhs) return false;
    cuts_[it->second].rhs = c.rhs;
    return true;
  }
  const std::vector<Cut>& cuts() const { return cuts_; }

 private:
  std::vector<Cut> cuts_;
  std::map<std::vector<std::pair<int, int>>, std::size_t> index_;
};

Cut cut_from(const FlowSample& s, const std::vector<bool>& side) {
  std::map<int, int> count;
  for (const FlowEdge& e : s.edges)
    if (side[static_cast<std::size_t>(e.src)] && !side[static_cast<std::size_t>(e.dst)]) ++count[e.feature];
  Cut c;
  c.coef.assign(count.begin(), count.end());
  for (auto [v, r] : s.sources)
    if (side[static_cast<std::size_t>(v)]) c.rhs += r;
  return c;
}

bool sample_feasible(const FlowSample& s, const std::vector<double>& cap) {
  return max_flow(s, cap).value >= static_cast<double>(s.demand()) - kTol;
}

class BranchAndCut {
 public:
  BranchAndCut(const FlowProblem& p, const SolverOptions& opts) : p_(p), opts_(opts), n_(p.features.size()), by_feature_(n_) {
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
      const FlowSample& s = p.samples[i];
      if (s.demand() == 0) continue;
      active_.push_back(i);
      for (const FlowEdge& e : s.edges) by_feature_[static_cast<std::size_t>(e.feature)].push_back(i);
      // Seeds: each source alone, and everything but the sink.
      std::vector<bool> side(static_cast<std::size_t>(s.num_nodes), false);
      for (auto [v, r] : s.sources) {
        side[static_cast<std::size_t>(v)] = true;
        pool_.add(cut_from(s, side));
        side[static_cast<std::size_t>(v)] = false;
      }
      std::fill(side.begin(), side.end(), true);
      side[static_cast<std::size_t>(s.sink)] = false;
      pool_.add(cut_from(s, side));
    }
    for (auto& v : by_feature_) v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  // LP with cut separation under bounds lo <= c <= hi. Empty when infeasible.
  std::optional<std::pair<double, std::vector<double>>> relax(const std::vector<double>& lo,
                                                                const std::vector<double>& hi) {
    for (;;) {
      CoveringLp lp;
      lp.upper.resize(n_);
      for (std::size_t j = 0; j < n_; ++j) lp.upper[j] = hi[j] - lo[j];
      for (const Cut& c : pool_.cuts()) {
        double r = static_cast<double>(c.rhs);
        for (auto [q, k] : c.coef) r -= k * lo[static_cast<std::size_t>(q)];
        if (r <= kTol) continue;
        std::vector<double> row(n_, 0.0);
        for (auto [q, k] : c.coef) row[static_cast<std::size_t>(q)] = k;
        lp.a.push_back(std::move(row));
        lp.b.push_back(r);
      }
      LpResult res = solve_covering_lp(lp);
      if (!res.feasible) return std::nullopt;
      std::vector<double> c(n_);
      for (std::size_t j = 0; j < n_; ++j) c[j] = lo[j] + res.x[j];
      bool added = false;
      for (std::size_t i : active_) {
        const FlowSample& s = p_.samples[i];
        MaxFlowResult mf = max_flow(s, c);
        if (mf.value < static_cast<double>(s.demand()) - kTol) added |= pool_.add(cut_from(s, mf.source_side));
      }
      if (!added) return std::make_pair(std::accumulate(c.begin(), c.end(), 0.0), std::move(c));
    }
  }

  bool feasible(const std::vector<std::int64_t>& c, const std::vector<std::size_t>& samples) const {
    std::vector<double> cap(c.begin(), c.end());
    return std::all_of(samples.begin(), samples.end(), [&](std::size_t i) { return sample_feasible(p_.samples[i], cap); });
  }

  // Ceiling of the relaxation, then each feature in increasing LP value is
  // dropped to zero when every sample using it stays feasible.
  std::vector<std::int64_t> round(const std::vector<double>& lp) const {
    std::vector<std::int64_t> c(n_);
    for (std::size_t j = 0; j < n_; ++j) c[j] = static_cast<std::int64_t>(std::ceil(lp[j] - kTol));
    if (!feasible(c, active_)) throw std::logic_error("rounded relaxation infeasible");
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lp[a] < lp[b]; });
    for (std::size_t q : order) {
      if (c[q] == 0) continue;
      const auto keep = c[q];
      c[q] = 0;
      if (!feasible(c, by_feature_[q])) c[q] = keep;
    }
    return c;
  }

  void branch(std::vector<double> lo, std::vector<double> hi) {
    if (++nodes_ > opts_.node_limit) {
      truncated_ = true;
      return;
    }
    auto r = relax(lo, hi);
    if (!r) return;
    auto& [bound, c] = *r;
    if (std::ceil(bound - kTol) >= static_cast<double>(best_cost_)) return;
    std::size_t pick = n_;
    double frac_best = 0;
    for (std::size_t j = 0; j < n_; ++j) {
      double f = c[j] - std::floor(c[j]);
      double d = std::min(f, 1 - f);
      if (d > kTol && d > frac_best) {
        frac_best = d;
        pick = j;
      }
    }
    if (pick == n_) {
      std::vector<std::int64_t> ci(n_);
      for (std::size_t j = 0; j < n_; ++j) ci[j] = std::llround(c[j]);
      const auto cost = std::accumulate(ci.begin(), ci.end(), std::int64_t{0});
      if (cost < best_cost_ && feasible(ci, active_)) {
        best_cost_ = cost;
        best_ = std::move(ci);
      }
      return;
    }
    const double v = c[pick];
    auto down_hi = hi;
    down_hi[pick] = std::floor(v);
    auto up_lo = lo;
    up_lo[pick] = std::ceil(v);
    if (v - std::floor(v) >= 0.5) {
      branch(up_lo, hi);
      branch(lo, down_hi);
    } else {
      branch(lo, down_hi);
      branch(up_lo, hi);
    }
  }

  FlowSolution run() {
    FlowSolution sol;
    sol.capacity.assign(n_, 0);
    if (active_.empty()) {
      sol.note = "exact: no sources";
      return sol;
    }
    std::vector<double> lo(n_, 0.0), hi(n_, kInf);
    auto root = relax(lo, hi);
    if (!root) throw std::logic_error("relaxation infeasible on a connected problem");
    sol.lp_bound = root->first;
    best_ = round(root->second);
    best_cost_ = std::accumulate(best_.begin(), best_.end(), std::int64_t{0});

    std::int64_t max_demand = 0;
    for (const auto& s : p_.samples) max_demand = std::max(max_demand, s.demand());
    if (n_ > opts_.exact_feature_limit) {
      sol.exact = false;
      sol.note = "rounded relaxation: " + std::to_string(n_) + " features exceed the exact limit " +
                 std::to_string(opts_.exact_feature_limit);
    } else if (max_demand > opts_.exact_supply_limit) {
      sol.exact = false;
      sol.note = "rounded relaxation: sample supply " + std::to_string(max_demand) + " exceeds the exact limit " +
                 std::to_string(opts_.exact_supply_limit);
    } else {
      branch(lo, hi);
      if (truncated_) {
        sol.exact = false;
        sol.note = "node limit " + std::to_string(opts_.node_limit) + " reached; best incumbent";
      } else {
        sol.note = "exact";
      }
    }
    sol.capacity = best_;
    sol.nodes = nodes_;
    sol.cuts = pool_.cuts().size();
    return sol;
  }

 private:
  const FlowProblem& p_;
  const SolverOptions& opts_;
  std::size_t n_;
  std::vector<std::size_t> active_;
  std::vector<std::vector<std::size_t>> by_feature_;
  CutPool pool_;
  std::vector<std::int64_t> best_;
  std::int64_t best_cost_ = 0;
  long nodes_ = 0;
  bool truncated_ = false;
};

void check_connected(const FlowProblem& p) {
  std::vector<std::string> bad;
  std::vector<double> unlimited(p.features.size(), kInf);
  for (const FlowSample& s : p.samples) {
    if (s.demand() == 0) continue;
    // With unbounded edges only the super-source arcs limit the flow.
    if (!sample_feasible(s, unlimited)) bad.push_back(s.id);
  }
  if (!bad.empty()) throw InfeasibleProblem(std::move(bad));
}

}  // namespace

FlowSolution solve(const FlowProblem& p, const SolverOptions& opts) {
  for (const FlowSample& s : p.samples)
    for (const FlowEdge& e : s.edges)
      if (e.feature < 0 || static_cast<std::size_t>(e.feature) >= p.features.size())
        throw std::out_of_range("flow edge feature out of range in " + s.id);
  check_connected(p);
  BranchAndCut bc(p, opts);
  FlowSolution sol = bc.run();
  sol.objective = std::accumulate(sol.capacity.begin(), sol.capacity.end(), std::int64_t{0});

  // Integral capacities give integral augmenting paths, hence integral flows.
  std::vector<double> cap(sol.capacity.begin(), sol.capacity.end());
  for (const FlowSample& s : p.samples) {
    MaxFlowResult mf = max_flow(s, cap);
    std::vector<std::int64_t> f;
    f.reserve(mf.edge_flow.size());
    for (double x : mf.edge_flow) f.push_back(std::llround(x));
    sol.flows.push_back(std::move(f));
  }
  std::string why;
  if (!verify_certificate(p, sol, &why)) throw std::logic_error("flow certificate: " + why);
  return sol;
}

}  // namespace rct
