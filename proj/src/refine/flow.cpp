#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <queue>
#include <stdexcept>

#include "rct/refine.hpp"

namespace rct {

std::int64_t FlowSample::demand() const {
  std::int64_t d = 0;
  for (auto [v, r] : sources) d += r;
  return d;
}

std::vector<std::int64_t> FlowSample::supplies() const {
  std::vector<std::int64_t> r(static_cast<std::size_t>(num_nodes), 0);
  for (auto [v, s] : sources) r[static_cast<std::size_t>(v)] += s;
  r[static_cast<std::size_t>(sink)] -= demand();
  return r;
}

namespace {

// Nodes that can reach `sink` along edges.
std::vector<bool> reaches(int n, const std::vector<Edge>& edges, int sink) {
  std::vector<std::vector<int>> rev(static_cast<std::size_t>(n));
  for (const Edge& e : edges) rev[static_cast<std::size_t>(e.dst)].push_back(e.src);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<int> stack{sink};
  seen[static_cast<std::size_t>(sink)] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int u : rev[static_cast<std::size_t>(v)])
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = true;
        stack.push_back(u);
      }
  }
  return seen;
}

}  // namespace

FlowProblem build_flow_problem(const std::vector<FlowInput>& inputs, double t, int scale) {
  FlowProblem p;
  p.threshold = t;
  p.scale = scale;
  std::map<EdgeFeature, int> feature_id;
  for (const FlowInput& in : inputs)
    for (const Edge& e : in.graph->edges) feature_id.emplace(edge_feature(*in.graph, e), 0);
  for (auto& [f, id] : feature_id) {
    id = static_cast<int>(p.features.size());
    p.features.push_back(f);
  }

  for (const FlowInput& in : inputs) {
    const Graph& g = *in.graph;
    const int n = static_cast<int>(g.num_nodes());
    if (in.sink < 0 || in.sink >= n) throw std::out_of_range("flow sink outside graph in " + in.id);
    if (in.attribution.size() != g.num_nodes()) throw std::invalid_argument("attribution size mismatch in " + in.id);
    FlowSample s;
    s.id = in.id;
    s.num_nodes = n;
    s.sink = in.sink;
    for (int v = 0; v < n; ++v) {
      const double a = in.attribution[static_cast<std::size_t>(v)];
      if (v == in.sink || !(a > t)) continue;
      const auto r = static_cast<std::int64_t>(std::floor(a * scale));
      if (r > 0) s.sources.emplace_back(v, r);
    }
    auto ok = reaches(n, g.edges, in.sink);
    bool feasible = std::all_of(s.sources.begin(), s.sources.end(),
                                [&](const auto& src) { return ok[static_cast<std::size_t>(src.first)]; });
    if (!feasible) {
      p.dropped.push_back(in.id);
      continue;
    }
    // Edges that cannot reach the sink never carry flow.
    for (const Edge& e : g.edges)
      if (ok[static_cast<std::size_t>(e.dst)]) s.edges.push_back({e.src, e.dst, feature_id.at(edge_feature(g, e))});
    p.samples.push_back(std::move(s));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Dinic

namespace {

class Dinic {
 public:
  explicit Dinic(int n) : adj_(static_cast<std::size_t>(n)), level_(static_cast<std::size_t>(n)), it_(static_cast<std::size_t>(n)) {}

  int add(int u, int v, double cap) {
    arcs_.push_back({v, cap});
    adj_[static_cast<std::size_t>(u)].push_back(static_cast<int>(arcs_.size()) - 1);
    arcs_.push_back({u, 0});
    adj_[static_cast<std::size_t>(v)].push_back(static_cast<int>(arcs_.size()) - 1);
    return static_cast<int>(arcs_.size()) - 2;
  }

  double run(int s, int t, double eps) {
    eps_ = eps;
    double total = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (double pushed = dfs(s, t, std::numeric_limits<double>::infinity())) total += pushed;
    }
    return total;
  }

  // Flow on the forward arc `a` equals the capacity of its reverse.
  double flow(int a) const { return arcs_[static_cast<std::size_t>(a ^ 1)].cap; }

  std::vector<bool> residual_reach(int s) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<int> stack{s};
    seen[static_cast<std::size_t>(s)] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int a : adj_[static_cast<std::size_t>(v)]) {
        const Arc& arc = arcs_[static_cast<std::size_t>(a)];
        if (arc.cap > eps_ && !seen[static_cast<std::size_t>(arc.to)]) {
          seen[static_cast<std::size_t>(arc.to)] = true;
          stack.push_back(arc.to);
        }
      }
    }
    return seen;
  }

 private:
  struct Arc {
    int to;
    double cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[static_cast<std::size_t>(s)] = 0;
    q.push(s);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int a : adj_[static_cast<std::size_t>(v)]) {
        const Arc& arc = arcs_[static_cast<std::size_t>(a)];
        if (arc.cap > eps_ && level_[static_cast<std::size_t>(arc.to)] < 0) {
          level_[static_cast<std::size_t>(arc.to)] = level_[static_cast<std::size_t>(v)] + 1;
          q.push(arc.to);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  double dfs(int v, int t, double limit) {
    if (v == t) return limit;
    auto& i = it_[static_cast<std::size_t>(v)];
    const auto& out = adj_[static_cast<std::size_t>(v)];
    for (; i < out.size(); ++i) {
      const int a = out[i];
      Arc& arc = arcs_[static_cast<std::size_t>(a)];
      if (arc.cap <= eps_ || level_[static_cast<std::size_t>(arc.to)] != level_[static_cast<std::size_t>(v)] + 1) continue;
      double pushed = dfs(arc.to, t, std::min(limit, arc.cap));
      if (pushed > 0) {
        arc.cap -= pushed;
        arcs_[static_cast<std::size_t>(a ^ 1)].cap += pushed;
        return pushed;
      }
    }
    return 0;
  }

  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> it_;
  double eps_ = 0;
};

}  // namespace

MaxFlowResult max_flow(const FlowSample& s, const std::vector<double>& capacity) {
  const int super = s.num_nodes;
  Dinic d(s.num_nodes + 1);
  std::vector<int> arc;
  arc.reserve(s.edges.size());
  for (const FlowEdge& e : s.edges) arc.push_back(d.add(e.src, e.dst, capacity.at(static_cast<std::size_t>(e.feature))));
  for (auto [v, r] : s.sources) d.add(super, v, static_cast<double>(r));
  MaxFlowResult out;
  out.value = d.run(super, s.sink, 1e-9);
  out.edge_flow.reserve(arc.size());
  for (int a : arc) out.edge_flow.push_back(d.flow(a));
  auto reach = d.residual_reach(super);
  out.source_side.assign(reach.begin(), reach.begin() + s.num_nodes);
  return out;
}

// ---------------------------------------------------------------------------

bool verify_certificate(const FlowProblem& p, const FlowSolution& sol, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (sol.capacity.size() != p.features.size()) return fail("capacity vector size");
  if (sol.flows.size() != p.samples.size()) return fail("certificate count");
  std::int64_t total = 0;
  for (auto c : sol.capacity) {
    if (c < 0) return fail("negative capacity");
    total += c;
  }
  if (total != sol.objective) return fail("objective differs from capacity sum");
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    const FlowSample& s = p.samples[i];
    const auto& f = sol.flows[i];
    if (f.size() != s.edges.size()) return fail(s.id + ": flow vector size");
    auto balance = s.supplies();
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
      const FlowEdge& edge = s.edges[e];
      if (f[e] < 0 || f[e] > sol.capacity[static_cast<std::size_t>(edge.feature)])
        return fail(s.id + ": capacity violated on edge " + std::to_string(e));
      // r_v + in = out  <=>  r_v + in - out = 0
      balance[static_cast<std::size_t>(edge.src)] -= f[e];
      balance[static_cast<std::size_t>(edge.dst)] += f[e];
    }
    for (std::size_t v = 0; v < balance.size(); ++v)
      if (balance[v] != 0) return fail(s.id + ": conservation violated at node " + std::to_string(v));
  }
  return true;
}

Abstraction extract_abstraction(const FlowProblem& p, const FlowSolution& s) {
  std::set<EdgeFeature> keep;
  for (std::size_t q = 0; q < p.features.size(); ++q)
    if (s.capacity.at(q) > 0) keep.insert(p.features[q]);
  return Abstraction(std::move(keep));
}

// ---------------------------------------------------------------------------
// LP export

namespace {

// CPLEX LP lines are limited in length; break long expressions.
class ExprWriter {
 public:
  explicit ExprWriter(std::ostream& out) : out_(out) {}
  void term(std::int64_t coef, const std::string& var) {
    std::string t = (coef < 0 ? " - " : (first_ ? " " : " + "));
    const auto mag = coef < 0 ? -coef : coef;
    if (mag != 1) t += std::to_string(mag) + " ";
    t += var;
    if (width_ + t.size() > 200) {
      out_ << "\n  ";
      width_ = 2;
    }
    out_ << t;
    width_ += t.size();
    first_ = false;
  }
  bool empty() const { return first_; }

 private:
  std::ostream& out_;
  std::size_t width_ = 0;
  bool first_ = true;
};

std::string fvar(std::size_t s, std::size_t e) { return "f" + std::to_string(s) + "_" + std::to_string(e); }

}  // namespace

void export_lp(const FlowProblem& p, std::ostream& out) {
  out << "\\ features:\n";
  for (std::size_t q = 0; q < p.features.size(); ++q) out << "\\   c" << q << " = " << p.features[q].str() << '\n';
  out << "Minimize\n obj:";
  {
    ExprWriter w(out);
    for (std::size_t q = 0; q < p.features.size(); ++q) w.term(1, "c" + std::to_string(q));
    if (w.empty()) out << " 0";
  }
  out << "\nSubject To\n";
  for (std::size_t si = 0; si < p.samples.size(); ++si) {
    const FlowSample& s = p.samples[si];
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
      out << " cap" << si << "_" << e << ":";
      ExprWriter w(out);
      w.term(1, fvar(si, e));
      w.term(-1, "c" + std::to_string(s.edges[e].feature));
      out << " <= 0\n";
    }
    std::vector<std::vector<std::pair<int, std::size_t>>> touching(static_cast<std::size_t>(s.num_nodes));
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
      touching[static_cast<std::size_t>(s.edges[e].src)].emplace_back(1, e);
      touching[static_cast<std::size_t>(s.edges[e].dst)].emplace_back(-1, e);
    }
    auto r = s.supplies();
    for (std::size_t v = 0; v < touching.size(); ++v) {
      if (touching[v].empty()) continue;  // isolated nodes carry r_v = 0 once unreachable ones are dropped
      out << " bal" << si << "_" << v << ":";
      ExprWriter w(out);
      for (auto [sign, e] : touching[v]) w.term(sign, fvar(si, e));
      out << " = " << r[v] << '\n';
    }
  }
  out << "Bounds\n";
  for (std::size_t q = 0; q < p.features.size(); ++q) out << " c" << q << " >= 0\n";
  out << "General\n";
  std::size_t col = 0;
  auto gen = [&](const std::string& v) {
    if (col + v.size() + 1 > 200) {
      out << '\n';
      col = 0;
    }
    out << ' ' << v;
    col += v.size() + 1;
  };
  for (std::size_t q = 0; q < p.features.size(); ++q) gen("c" + std::to_string(q));
  for (std::size_t si = 0; si < p.samples.size(); ++si)
    for (std::size_t e = 0; e < p.samples[si].edges.size(); ++e) gen(fvar(si, e));
  out << "\nEnd\n";
}

void export_lp(const FlowProblem& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  export_lp(p, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace rct
