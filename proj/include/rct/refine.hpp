#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rct/abstraction.hpp"
#include "rct/adversary.hpp"
#include "rct/bundle.hpp"

namespace rct {

// ---------------------------------------------------------------------------
// Flow problem. One shared integer capacity c_q per feature; every sample
// must route its source supplies to its sink with each edge e carrying at
// most c_{feature(e)}. Minimise the sum of capacities.

struct FlowEdge {
  int src = 0;
  int dst = 0;
  int feature = 0;  // index into FlowProblem::features
};

struct FlowSample {
  std::string id;
  int num_nodes = 0;
  int sink = 0;
  std::vector<FlowEdge> edges;
  std::vector<std::pair<int, std::int64_t>> sources;  // node, supply r_v > 0

  std::int64_t demand() const;  // sum of source supplies = -r_sink
  /// r_v for every node; sums to zero.
  std::vector<std::int64_t> supplies() const;
};

struct FlowProblem {
  std::vector<EdgeFeature> features;  // sorted
  std::vector<FlowSample> samples;
  std::vector<std::string> dropped;   // samples whose sources cannot reach the sink
  double threshold = 0.05;
  int scale = 100;
};

/// Input of one sample: encoded graph, per-node attribution, prediction node.
struct FlowInput {
  std::string id;
  const Graph* graph = nullptr;
  std::vector<double> attribution;
  NodeId sink = kNoNode;
};

/// Sources are nodes other than the sink with attribution above `t`, with
/// supply floor(scale * a); the sink absorbs their sum. Samples with a source
/// that cannot reach the sink are listed in `dropped`.
FlowProblem build_flow_problem(const std::vector<FlowInput>& inputs, double t, int scale = 100);

// ---------------------------------------------------------------------------
// Max-flow (Dinic) on one sample with given per-feature capacities.

struct MaxFlowResult {
  double value = 0;
  std::vector<double> edge_flow;  // per sample edge
  std::vector<bool> source_side;  // residual reachability from the super source
};
MaxFlowResult max_flow(const FlowSample& s, const std::vector<double>& capacity);

// ---------------------------------------------------------------------------
// Linear programming

/// minimize sum(c) s.t. A c >= b, 0 <= c <= upper. Solved as the packing
/// dual with a dense primal simplex (Dantzig pricing, Bland's rule after a
/// run of degenerate pivots).
struct CoveringLp {
  std::vector<std::vector<double>> a;  // rows over n variables
  std::vector<double> b;
  std::vector<double> upper;  // size n; infinity for none
};

struct LpResult {
  bool feasible = false;
  double objective = 0;
  std::vector<double> x;
  long pivots = 0;
};
LpResult solve_covering_lp(const CoveringLp& lp);

// ---------------------------------------------------------------------------
// Solver

/// Some sample has a source with no path to its sink.
class InfeasibleProblem : public std::runtime_error {
 public:
  explicit InfeasibleProblem(std::vector<std::string> ids);
  const std::vector<std::string>& samples() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

struct SolverOptions {
  std::size_t exact_feature_limit = 64;
  std::int64_t exact_supply_limit = 10000;  // per sample
  long node_limit = 20000;
};

struct FlowSolution {
  std::vector<std::int64_t> capacity;  // per feature
  std::int64_t objective = 0;
  double lp_bound = 0;                 // root relaxation
  bool exact = true;                   // false: rounded relaxation
  std::string note;
  std::vector<std::vector<std::int64_t>> flows;  // integral certificate per sample edge
  long nodes = 0;
  std::size_t cuts = 0;
};

/// Exact branch-and-cut when the instance is within the limits, otherwise
/// the LP relaxation rounded up and greedily thinned (flagged `exact=false`).
FlowSolution solve(const FlowProblem& p, const SolverOptions& opts = {});

/// Checks conservation and capacities of the certificate flows exactly.
bool verify_certificate(const FlowProblem& p, const FlowSolution& s, std::string* why = nullptr);

/// Features with positive capacity.
Abstraction extract_abstraction(const FlowProblem& p, const FlowSolution& s);

/// Writes the integer program in CPLEX LP format. Variables: `c<i>` is the
/// capacity of features[i]; `f<s>_<e>` the flow on edge e of sample s.
/// Constraints: `cap<s>_<e>` (f - c <= 0) and `bal<s>_<v>` (out - in = r_v).
void export_lp(const FlowProblem& p, std::ostream& out);
void export_lp(const FlowProblem& p, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Refinement of a trained bundle

struct RefineOptions {
  double threshold = 0.05;
  std::size_t max_samples = 2000;
  std::uint64_t seed = 0;
  SolverOptions solver;
};

struct RefineReport {
  Abstraction alpha;
  FlowProblem problem;
  FlowSolution solution;
  std::size_t samples = 0;
  std::size_t abstained = 0;
};

/// Attribution per sample (against the abstain output where the bundle
/// abstains, the label otherwise), flow problem over all samples, solve,
/// extract.
RefineReport refine_representation(const std::vector<AttackTarget>& data, const ModelBundle& bundle,
                                   const Vocabulary& vocab, const RefineOptions& opts);

}  // namespace rct
