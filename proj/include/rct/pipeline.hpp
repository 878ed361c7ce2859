#pragma once

#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rct/adversary.hpp"
#include "rct/bundle.hpp"
#include "rct/dataset.hpp"
#include "rct/refine.hpp"

namespace rct {

// ---------------------------------------------------------------------------
// Data

/// One attack target per program holding the dataset's samples of that
/// program, in first-appearance order. Pointers refer into `d.programs`.
std::vector<AttackTarget> make_targets(const DatasetBundle& d, const Dataset& split);

std::size_t sample_count(const std::vector<AttackTarget>& targets);

/// Encoded graphs of `targets` under `alpha`, with their annotations.
struct EncodedSet {
  std::deque<Graph> graphs;
  std::vector<Example> examples;
};
EncodedSet encode_targets(const std::vector<AttackTarget>& targets, const Abstraction& alpha, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Threshold calibration

struct ScoredSample {
  double g = 0;  // 1 - p_abstain
  bool correct = false;
};

/// Smallest h among the observed scores whose predicted subset {g >= h} is
/// at least `t_acc` accurate. 0 when t_acc <= 0; 1 (abstain everywhere) when
/// no score qualifies.
double calibrate_threshold(std::vector<ScoredSample> scored, double t_acc);

/// Scores every sample of `targets` with the bundle's model and abstraction.
std::vector<ScoredSample> score_samples(const ModelBundle& b, const std::vector<AttackTarget>& targets,
                                        const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  ModelConfig model;
  AttackConfig attack;  // used during adversarial training
  RefineOptions refine;
  /// Target accuracy per round of the multi-model loop; the last entry
  /// repeats. See `schedule_for`.
  std::vector<double> t_acc{1.0};
  double eps_acc = 0.02;
  int adversarial_epochs = 5;
  int max_refinements = 0;  // 0: until the abstraction stops shrinking
  int max_models = 0;       // 0: until nothing is left or nothing is claimed
  std::ostream* log = nullptr;

  void validate() const;
};

/// [t, t, ...] for t > 0; [1.0, 0.0] for t = 0, i.e. accurate models first
/// and a final model that predicts everything left.
std::vector<double> schedule_for(double t_acc);

struct RefinementTrace {
  std::size_t alpha_size = 0;
  double valid_accuracy = 0;  // label accuracy under the new abstraction, before retraining
  std::size_t counterexamples = 0;
  bool accepted = false;
};

struct RobustTrainResult {
  ModelBundle bundle;
  std::vector<RefinementTrace> refinements;
  double h_train = 0;  // threshold at t_acc - eps used while attacking
};

/// Abstain training, then refinement and adversarial retraining while the
/// abstraction shrinks, then the final calibration of h against `t_acc` on
/// `valid`. For t_acc <= 0 every stage uses plain cross entropy instead.
RobustTrainResult robust_train(const std::vector<AttackTarget>& train, const std::vector<AttackTarget>& valid,
                               const Vocabulary& vocab, const PipelineConfig& cfg, double t_acc,
                               std::uint64_t seed);

struct ApplyResult {
  std::vector<AttackTarget> abstained;  // remaining positions, annotations extended
  std::size_t predicted = 0;
  std::size_t total = 0;
};

/// Predicts every position of `targets`; predicted positions are annotated
/// (with the ground-truth label when `annotate_truth`, else the prediction)
/// and removed; the rest is returned with the new annotations attached.
ApplyResult apply_model(const ModelBundle& b, const std::vector<AttackTarget>& targets, const Vocabulary& vocab,
                        bool annotate_truth);

struct RoundTrace {
  double t_acc = 0;
  std::size_t train_samples = 0;
  std::size_t claimed = 0;
  double h = 0;
  std::size_t alpha_size = 0;
  std::vector<RefinementTrace> refinements;
  bool kept = false;
};

struct PipelineResult {
  std::vector<ModelBundle> models;
  std::vector<RoundTrace> rounds;
};

/// Trains bundles in sequence on what the previous ones
/// abstained on, until nothing is left or a bundle trained at the last
/// schedule entry claims nothing. A bundle that claims nothing earlier in
/// the schedule is dropped and the next entry is tried.
PipelineResult accurate_and_robust_train(const std::vector<AttackTarget>& train,
                                         const std::vector<AttackTarget>& valid, const Vocabulary& vocab,
                                         const PipelineConfig& cfg, std::uint64_t seed);

/// Baseline: plain cross entropy, never abstains (h = 0, full abstraction).
ModelBundle train_baseline(const std::vector<AttackTarget>& train, const std::vector<AttackTarget>& valid,
                           const Vocabulary& vocab, const ModelConfig& cfg, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Exhaustive rename verification

enum class VerifyStatus { Verified, Counterexample, UnverifiedBudget };
const char* verify_status_name(VerifyStatus s);

struct VerifyResult {
  VerifyStatus status = VerifyStatus::Verified;
  std::optional<Counterexample> counterexample;
  std::size_t cone_nodes = 0;
  std::size_t variables = 0;  // renameable bindings touching the cone
  std::size_t names = 0;      // candidate names per variable
  std::size_t enumerated = 0;
};

/// Candidate names for one program: vocabulary words absent from the
/// program that are valid identifiers, plus one word outside the vocabulary
/// (all such words encode alike).
std::vector<std::string> rename_candidates(const Program& p, const Vocabulary& vocab);

/// Nodes that reach `position` within `steps` reversed edges of `g`.
std::vector<bool> dependency_cone(const Graph& g, NodeId position, int steps);

/// Every single-variable renaming that can reach sample `sample` of `t`
/// within the model's steps under the bundle's abstraction, applied with
/// the target's annotations. Verified iff each variant (and the original)
/// yields the label or abstains. A returned counterexample replays through
/// `bundle_predictor`.
VerifyResult exhaustive_verify_renamings(const ModelBundle& b, const Vocabulary& vocab, const AttackTarget& t,
                                         std::size_t sample, std::size_t max_enumerations);

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string name;
  RobustnessReport report;
};

/// Accuracy / robustness / abstain table followed by the breakdown table
/// (forall-correct, exists-incorrect, abstain) per original outcome.
void write_report_table(std::ostream& out, const std::vector<ReportRow>& rows);
/// One JSON object per row.
void write_report_records(std::ostream& out, const std::vector<ReportRow>& rows);

/// `manifest.txt`: `vocab <path>` then one `bundle <dir> <alpha> <h>` line
/// per model in application order.
struct Manifest {
  std::filesystem::path vocab;
  std::vector<std::filesystem::path> bundles;
};
void save_pipeline(const std::filesystem::path& dir, const PipelineResult& r, const Vocabulary& vocab);
Manifest load_manifest(const std::filesystem::path& dir);
std::vector<ModelBundle> load_stack(const Manifest& m, Vocabulary* vocab);

}  // namespace rct
