#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "flow_oracle.hpp"
#include "six_node.hpp"
#include "rct/refine.hpp"
#include "toy.hpp"

using namespace rct;
using namespace rct::testing::six_node;

namespace {

std::int64_t cost_of(const FlowProblem& p, const FlowSolution& s, EdgeFeature f) {
  auto it = std::find(p.features.begin(), p.features.end(), f);
  REQUIRE(it != p.features.end());
  return s.capacity[static_cast<std::size_t>(it - p.features.begin())];
}

std::string out_dir() { return RCT_TEST_OUTPUT_DIR; }

}  // namespace

TEST_CASE("edge features of the six-node graph") {
  Graph g = six_node_graph();
  CHECK(edge_feature(g, g.edges[1]) == EdgeFeature{EdgeType::Ast, A, B});  // 1 -> 3
  CHECK(edge_feature(g, g.edges[5]) == edge_feature(g, g.edges[8]));      // 3 -> 1 and 5 -> 2
  Graph h = g;
  h.values = {7, 3, 1, 9, 2, 5};
  h.words = {"x", "y", "z", "w", "v", "u"};
  for (const Edge& e : g.edges) CHECK(edge_feature(g, e) == edge_feature(h, e));
}

TEST_CASE("supplies of the six-node instance") {
  Graph g = six_node_graph();
  FlowProblem p = build_flow_problem({six_node_input(g)}, 0.05);
  REQUIRE(p.samples.size() == 1);
  auto r = p.samples[0].supplies();
  CHECK(r == std::vector<std::int64_t>{-70, 0, 0, 0, 0, 70});
  // Only the sink's own attribution above the threshold: no sources.
  FlowInput in = six_node_input(g);
  in.attribution = {0.96, 0.01, 0.01, 0.01, 0.005, 0.005};
  FlowProblem q = build_flow_problem({in}, 0.05);
  CHECK(q.samples[0].demand() == 0);
  FlowSolution s = solve(q);
  CHECK(s.objective == 0);
  CHECK(extract_abstraction(q, s).size() == 0);
}

TEST_CASE("six-node instance solves to two features at 70") {
  Graph g = six_node_graph();
  FlowProblem p = build_flow_problem({six_node_input(g)}, 0.05);
  FlowSolution s = solve(p);
  CHECK(s.exact);
  CHECK(s.objective == 140);
  const EdgeFeature q3{EdgeType::Ast, B, A}, q7{EdgeType::Ast, D, B};
  CHECK(cost_of(p, s, q3) == 70);
  CHECK(cost_of(p, s, q7) == 70);
  std::string why;
  CHECK_MESSAGE(verify_certificate(p, s, &why), why);

  Abstraction alpha = extract_abstraction(p, s);
  CHECK(alpha == Abstraction({q3, q7}));
  Graph a = apply_abstraction(alpha, g);
  std::vector<std::pair<int, int>> kept;
  for (const Edge& e : a.edges) kept.emplace_back(e.src + 1, e.dst + 1);
  std::sort(kept.begin(), kept.end());
  CHECK(kept == std::vector<std::pair<int, int>>{{3, 1}, {5, 2}, {6, 3}});
  CHECK(a.num_nodes() == g.num_nodes());
  for (const Edge& e : a.edges) CHECK(edge_feature(a, e) == edge_feature(g, e));
}

TEST_CASE("supplies balance on generated samples") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    Graph g = six_node_graph();
    std::vector<double> a(6);
    for (double& x : a) x = std::uniform_real_distribution<double>(0, 1)(rng);
    double sum = 0;
    for (double x : a) sum += x;
    for (double& x : a) x /= sum;
    FlowInput in = six_node_input(g);
    in.attribution = a;
    in.sink = static_cast<NodeId>(i % 6);
    FlowProblem p = build_flow_problem({in}, 0.05);
    REQUIRE(p.samples.size() == 1);
    auto r = p.samples[0].supplies();
    std::int64_t total = 0;
    for (auto x : r) total += x;
    CHECK(total == 0);
    for (auto [v, s] : p.samples[0].sources) {
      CHECK(v != in.sink);
      CHECK(s == static_cast<std::int64_t>(std::floor(100 * a[static_cast<std::size_t>(v)])));
    }
  }
}

TEST_CASE("disconnected samples are dropped, hand-built ones rejected") {
  Graph g;
  g.kinds = {A, B, C};
  g.words.assign(3, "");
  g.values.assign(3, 0);
  g.edges = {{1, 0, EdgeType::Ast}};
  FlowInput in{"cut", &g, {0.2, 0.3, 0.5}, 0};
  FlowInput ok{"fine", &g, {0.2, 0.8, 0.0}, 0};
  FlowProblem p = build_flow_problem({in, ok}, 0.05);
  CHECK(p.dropped == std::vector<std::string>{"cut"});
  REQUIRE(p.samples.size() == 1);
  CHECK(solve(p).objective == 80);

  FlowProblem bad = p;
  bad.samples[0].sources.emplace_back(2, 5);
  try {
    solve(bad);
    FAIL("expected InfeasibleProblem");
  } catch (const InfeasibleProblem& e) {
    CHECK(e.samples() == std::vector<std::string>{"fine"});
  }
}

TEST_CASE("covering lp") {
  const double inf = std::numeric_limits<double>::infinity();
  SUBCASE("odd cycle has a half-integral optimum") {
    CoveringLp lp{{{1, 1, 0}, {0, 1, 1}, {1, 0, 1}}, {1, 1, 1}, {inf, inf, inf}};
    LpResult r = solve_covering_lp(lp);
    REQUIRE(r.feasible);
    CHECK(r.objective == doctest::Approx(1.5));
    for (double x : r.x) CHECK(x == doctest::Approx(0.5));
  }
  SUBCASE("upper bounds shift the optimum") {
    CoveringLp lp{{{1, 1}}, {10}, {3, inf}};
    LpResult r = solve_covering_lp(lp);
    REQUIRE(r.feasible);
    CHECK(r.objective == doctest::Approx(10));
    CoveringLp tight{{{1, 2}}, {10}, {inf, 2}};
    LpResult t = solve_covering_lp(tight);
    CHECK(t.objective == doctest::Approx(8));  // c2 = 2, c1 = 6
    CHECK(t.x[1] == doctest::Approx(2));
  }
  SUBCASE("infeasible bounds") {
    CoveringLp lp{{{1, 1}}, {10}, {3, 4}};
    CHECK_FALSE(solve_covering_lp(lp).feasible);
  }
  SUBCASE("no rows") {
    CoveringLp lp{{}, {}, {inf, inf}};
    LpResult r = solve_covering_lp(lp);
    CHECK(r.feasible);
    CHECK(r.objective == 0);
  }
  SUBCASE("random instances satisfy their rows") {
    std::mt19937_64 rng(11);
    for (int it = 0; it < 200; ++it) {
      CoveringLp lp;
      const int n = 1 + static_cast<int>(rng() % 6), m = static_cast<int>(rng() % 8);
      lp.upper.assign(static_cast<std::size_t>(n), inf);
      for (int i = 0; i < m; ++i) {
        std::vector<double> row(static_cast<std::size_t>(n));
        for (double& x : row) x = static_cast<double>(rng() % 3);
        row[rng() % static_cast<std::size_t>(n)] = 1;
        lp.a.push_back(row);
        lp.b.push_back(static_cast<double>(1 + rng() % 50));
      }
      LpResult r = solve_covering_lp(lp);
      REQUIRE(r.feasible);
      double sum = 0;
      for (double x : r.x) sum += x;
      CHECK(sum == doctest::Approx(r.objective));
      for (int i = 0; i < m; ++i) {
        double lhs = 0;
        for (int j = 0; j < n; ++j) lhs += lp.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * r.x[static_cast<std::size_t>(j)];
        CHECK(lhs >= lp.b[static_cast<std::size_t>(i)] - 1e-6);
      }
      // Any single row alone bounds the optimum from below.
      for (int i = 0; i < m; ++i) {
        double kmax = *std::max_element(lp.a[static_cast<std::size_t>(i)].begin(), lp.a[static_cast<std::size_t>(i)].end());
        CHECK(r.objective >= lp.b[static_cast<std::size_t>(i)] / kmax - 1e-6);
      }
    }
  }
}

TEST_CASE("max flow agrees with Edmonds-Karp") {
  std::mt19937_64 rng(21);
  for (int it = 0; it < 100; ++it) {
    FlowProblem p = testing::random_flow_problem(rng, 6, 100);
    std::vector<std::int64_t> cap(6);
    for (auto& c : cap) c = static_cast<std::int64_t>(rng() % 60);
    std::vector<double> capd(cap.begin(), cap.end());
    for (const FlowSample& s : p.samples) CHECK(max_flow(s, capd).value == doctest::Approx(testing::ek_max_flow(s, cap)));
  }
}

TEST_CASE("exact solver matches the exhaustive oracle") {
  std::mt19937_64 rng(42);
  for (int it = 0; it < 50; ++it) {
    const int features = 2 + static_cast<int>(rng() % 9);
    FlowProblem p = testing::random_flow_problem(rng, features, 30);
    FlowSolution s = solve(p);
    auto o = testing::BruteForceOracle(p).run();
    CAPTURE(it);
    CHECK(s.exact);
    CHECK(s.objective == o.objective);
    CHECK(verify_certificate(p, s));
    CHECK(static_cast<double>(s.objective) >= s.lp_bound - 1e-6);
  }
}

TEST_CASE("odd cycle needs branching") {
  // Three samples, each a source with two parallel edges of a different
  // feature pair: the relaxation puts r/2 on every feature.
  for (std::int64_t r : {1, 3, 7}) {
    FlowProblem p;
    for (int q = 0; q < 3; ++q) p.features.push_back(EdgeFeature::from_index(q));
    const std::pair<int, int> pairs[] = {{0, 1}, {1, 2}, {0, 2}};
    for (auto [a, b] : pairs) {
      FlowSample s;
      s.id = std::to_string(a) + std::to_string(b);
      s.num_nodes = 2;
      s.sink = 0;
      s.edges = {{1, 0, a}, {1, 0, b}};
      s.sources = {{1, r}};
      p.samples.push_back(s);
    }
    FlowSolution s = solve(p);
    CHECK(s.lp_bound == doctest::Approx(1.5 * static_cast<double>(r)));
    CHECK(s.objective == (3 * r + 1) / 2);
    CHECK(s.exact);
    CHECK(verify_certificate(p, s));
  }
}

TEST_CASE("rounded relaxation is feasible and flagged") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 20; ++it) {
    FlowProblem p = testing::random_flow_problem(rng, 8, 100);
    SolverOptions small;
    small.exact_feature_limit = 2;
    FlowSolution r = solve(p, small);
    FlowSolution e = solve(p);
    CHECK_FALSE(r.exact);
    CHECK(r.note.find("rounded") != std::string::npos);
    CHECK(verify_certificate(p, r));
    CHECK(r.objective >= e.objective);
    CHECK(static_cast<double>(r.objective) >= r.lp_bound - 1e-6);
  }
}

TEST_CASE("certificate check catches broken flows") {
  Graph g = six_node_graph();
  FlowProblem p = build_flow_problem({six_node_input(g)}, 0.05);
  FlowSolution s = solve(p);
  FlowSolution broken = s;
  for (auto& f : broken.flows[0]) f = 0;
  std::string why;
  CHECK_FALSE(verify_certificate(p, broken, &why));
  CHECK(why.find("conservation") != std::string::npos);
  broken = s;
  for (auto& c : broken.capacity) c = c > 0 ? c - 1 : 0;
  broken.objective -= 2;
  CHECK_FALSE(verify_certificate(p, broken, &why));
  CHECK(why.find("capacity") != std::string::npos);
}

TEST_CASE("abstraction keeps edges by feature alone") {
  std::mt19937_64 rng(5);
  for (int it = 0; it < 30; ++it) {
    Graph g;
    const int n = 10;
    for (int v = 0; v < n; ++v) g.kinds.push_back(static_cast<NodeKind>(rng() % 4));
    g.words.assign(n, "");
    g.values.assign(n, 0);
    for (int k = 0; k < 25; ++k)
      g.edges.push_back({static_cast<NodeId>(rng() % n), static_cast<NodeId>(rng() % n), static_cast<EdgeType>(rng() % 6)});
    std::set<EdgeFeature> pick;
    for (const Edge& e : g.edges)
      if (rng() % 2) pick.insert(edge_feature(g, e));
    Abstraction alpha(pick);

    // Relabel nodes and shuffle edges: the kept multiset maps along.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Graph h = g;
    for (int v = 0; v < n; ++v) h.kinds[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] = g.kinds[static_cast<std::size_t>(v)];
    for (Edge& e : h.edges) e = {perm[static_cast<std::size_t>(e.src)], perm[static_cast<std::size_t>(e.dst)], e.type};
    std::shuffle(h.edges.begin(), h.edges.end(), rng);

    auto key = [](const Edge& e) { return std::tuple(e.src, e.dst, static_cast<int>(e.type)); };
    std::vector<std::tuple<int, int, int>> a, b;
    for (const Edge& e : apply_abstraction(alpha, g).edges)
      a.push_back(key({perm[static_cast<std::size_t>(e.src)], perm[static_cast<std::size_t>(e.dst)], e.type}));
    for (const Edge& e : apply_abstraction(alpha, h).edges) b.push_back(key(e));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(apply_abstraction(Abstraction::full(), g).edges == g.edges);
    CHECK(apply_abstraction(Abstraction(), g).edges.empty());
  }
}

TEST_CASE("lp export") {
  Graph g = six_node_graph();
  FlowProblem p = build_flow_problem({six_node_input(g)}, 0.05);
  std::ostringstream out;
  export_lp(p, out);
  const std::string lp = out.str();
  std::istringstream in(lp);
  std::string line;
  int caps = 0, bals = 0;
  while (std::getline(in, line)) {
    caps += line.rfind(" cap", 0) == 0;
    bals += line.rfind(" bal", 0) == 0;
  }
  CHECK(caps == static_cast<int>(p.samples[0].edges.size()));
  CHECK(bals == 6);
  CHECK(lp.find("General") != std::string::npos);
  export_lp(p, std::filesystem::path(out_dir()) / "six_node.lp");

  std::ostringstream empty;
  export_lp(FlowProblem{}, empty);
  CHECK(empty.str() == "\\ features:\nMinimize\n obj: 0\nSubject To\nBounds\nGeneral\n\nEnd\n");
  export_lp(FlowProblem{}, std::filesystem::path(out_dir()) / "empty.lp");

  // Random instances for the external reader.
  std::mt19937_64 rng(9);
  std::ofstream expect(std::filesystem::path(out_dir()) / "random_lp_expected.txt");
  for (int i = 0; i < 5; ++i) {
    FlowProblem r = testing::random_flow_problem(rng, 6, 100);
    const auto path = std::filesystem::path(out_dir()) / ("random" + std::to_string(i) + ".lp");
    export_lp(r, path);
    expect << path.string() << ' ' << solve(r).objective << '\n';
  }
}

TEST_CASE("refinement of a model that ignores its neighbours") {
  auto toy = testing::make_toy(6, 300);
  ModelBundle b;
  b.model = std::make_shared<GnnModel>(testing::tiny_model(), toy.vocab.size());
  for (std::size_t i = 0; i < b.model->params.size(); ++i) {
    auto& prm = b.model->params[i];
    if (prm.name.rfind("wv_", 0) == 0) prm.value.setZero();
  }
  b.h = 0.0;
  RefineOptions opts;
  RefineReport rep = refine_representation(toy.targets, b, toy.vocab, opts);
  CHECK(rep.samples == toy.samples());
  for (const auto& s : rep.problem.samples) CHECK(s.demand() == 0);
  CHECK(rep.alpha.size() == 0);
}

TEST_CASE("refinement of a random model keeps fewer edges") {
  auto toy = testing::make_toy(6, 310);
  ModelBundle b;
  b.model = std::make_shared<GnnModel>(testing::tiny_model(8), toy.vocab.size());
  b.h = 0.0;
  RefineOptions opts;
  opts.max_samples = 40;
  RefineReport rep = refine_representation(toy.targets, b, toy.vocab, opts);
  CHECK(rep.samples == std::min<std::size_t>(40, toy.samples()));
  CHECK(verify_certificate(rep.problem, rep.solution));
  std::size_t before = 0, after = 0;
  for (const auto& t : toy.targets) {
    Graph g = model_input(*t.program, t.annotations, Abstraction::full(), toy.vocab);
    before += g.edges.size();
    after += apply_abstraction(rep.alpha, g).edges.size();
  }
  CHECK(after < before);
  CHECK(rep.alpha.size() <= rep.problem.features.size());
}
