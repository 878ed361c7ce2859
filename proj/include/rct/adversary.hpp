#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rct/bundle.hpp"
#include "rct/minilang.hpp"
#include "rct/model.hpp"

namespace rct {

// ---------------------------------------------------------------------------
// Modifications. Node ids of the original program survive every
// modification (new nodes are appended), so positions never need remapping.

enum class ModKind : std::uint8_t {
  Rename,       // one variable or parameter binding, all occurrences
  FieldRename,  // one object field name, every key and member access
  Constant,     // literal replaced by another literal of the same kind
  Wrap,         // e  ->  cond ? e : e
};

struct Modification {
  ModKind kind = ModKind::Rename;
  NodeId node = kNoNode;  // Rename: declaration; Constant, Wrap: target
  BindingKind binding = BindingKind::Variable;
  std::string from;       // Rename, FieldRename
  std::string to;         // new name, or new literal value for Constant
  std::string cond;       // Wrap: condition source

  /// Single-line JSON object.
  std::string to_json() const;
  static Modification from_json(const std::string& text);
  friend bool operator==(const Modification&, const Modification&) = default;
};

using DeltaSeq = std::vector<Modification>;

std::string delta_to_json(const DeltaSeq& d);
DeltaSeq delta_from_json(const std::string& text);

/// Applies one modification in place. Returns false and leaves `p`
/// untouched when the modification is stale (its target is gone).
bool apply_modification(Program& p, const Modification& m);

/// Applies modifications in order; the sequence is truncated at the first
/// stale one. `applied` receives the number applied.
Program apply_delta(const Program& p, const DeltaSeq& d, std::size_t* applied = nullptr);

/// Where a modification can attach: node plus kind.
struct ModSite {
  NodeId node = kNoNode;
  ModKind kind = ModKind::Rename;
  friend bool operator==(const ModSite&, const ModSite&) = default;
};

/// Modification sites of a well-typed program, in node order. `types` is
/// the oracle labelling of `p`; only expressions of primitive type are
/// wrappable.
std::vector<ModSite> modification_sites(const Program& p, const TypeMap& types);

struct AttackConfig {
  int budget = 20;          // explored sequences per sample
  int max_length = 8;       // modifications per sequence
  double epsilon = 0.01;    // guided search floor
  std::vector<std::string> names;    // rename pool
  std::vector<std::string> strings;  // string literal pool
  std::uint64_t seed = 0;
  int threads = 1;          // evaluation workers; 0: hardware concurrency

  void validate() const;
};

/// Identifier-shaped and not a keyword, builtin or member name.
bool usable_rename(std::string_view w);

/// Fixed rename words, none of them a keyword, builtin or member name.
const std::vector<std::string>& fixed_rename_words();
/// Fixed words plus the identifier-shaped corpus words of `vocab`.
std::vector<std::string> rename_pool(const Vocabulary& vocab);

/// Draws node indices with probability proportional to weight + epsilon.
class PositionSampler {
 public:
  PositionSampler(std::vector<NodeId> nodes, const std::vector<double>& weights, double epsilon);
  NodeId draw(std::mt19937_64& rng) const;
  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<double>& probabilities() const { return probs_; }

 private:
  std::vector<NodeId> nodes_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

/// Builds a concrete modification for a site of the current program;
/// nullopt if no valid instance exists (e.g. the name pool is exhausted).
std::optional<Modification> instantiate(const Program& current, const ModSite& site, const AttackConfig& cfg,
                                        std::mt19937_64& rng);

/// Random boolean expression over constants with at most `depth` levels.
std::string random_condition(std::mt19937_64& rng, int depth = 3);

/// Random sequence of 1..max_length modifications whose target nodes come
/// from `sampler` (restricted to `sites`).
DeltaSeq sample_delta(const Program& p, const std::vector<ModSite>& sites, const PositionSampler& sampler,
                      const AttackConfig& cfg, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Search

/// All samples of one program together with the data the search needs.
struct AttackTarget {
  std::string id;
  const Program* program = nullptr;
  const ParamEnv* params = nullptr;
  const TypeMap* types = nullptr;
  Annotations annotations;        // fixed overlay for the attacked model
  std::vector<NodeId> positions;
  std::vector<int> labels;        // label index per position
};

/// Label index or kAbstain for each of `t.positions` in a (modified) copy
/// of `t.program`.
using Predictor = std::function<std::vector<int>(const AttackTarget& t, const Program& modified)>;

/// Predictor of one bundle using the target's annotations. Holds references:
/// `b` and `vocab` must outlive it.
Predictor bundle_predictor(const ModelBundle& b, const Vocabulary& vocab);
Predictor bundle_predictor(ModelBundle&&, const Vocabulary&) = delete;
/// Predictor of a bundle stack applied in order. Holds references.
Predictor stack_predictor(const std::vector<ModelBundle>& stack, const Vocabulary& vocab);
Predictor stack_predictor(std::vector<ModelBundle>&&, const Vocabulary&) = delete;

struct Counterexample {
  std::string program;
  NodeId position = kNoNode;
  DeltaSeq delta;
  int predicted = 0;
  int expected = 0;

  /// `program-id TAB position TAB delta-json TAB predicted TAB expected`
  std::string to_line() const;
  static Counterexample from_line(const std::string& line);
};

/// Per-sample outcome of one search.
struct SampleOutcome {
  std::optional<Counterexample> counterexample;
  bool all_correct = true;     // every explored variant predicted the label
  bool original_abstain = false;
  bool original_correct = false;
};

struct SearchStats {
  std::size_t explored = 0;
  std::size_t rejected = 0;  // sequences failing the label-preservation re-check
};

/// Shared-sequence greedy search: the unmodified program first, then up to
/// `cfg.budget` random sequences, each evaluated once for all samples that
/// are still unbroken. Sequence j draws from a stream keyed by
/// (cfg.seed, stream, j), so a smaller budget explores a prefix of a larger
/// one. Every returned counterexample has been replayed from scratch.
std::vector<SampleOutcome> greedy_search(const AttackTarget& t, const Predictor& predict, const AttackConfig& cfg,
                                         std::uint64_t stream, SearchStats* stats = nullptr);

/// Search for one sample with target nodes drawn from `attribution` + eps.
SampleOutcome guided_search(const AttackTarget& t, std::size_t sample, const std::vector<double>& attribution,
                            const Predictor& predict, const AttackConfig& cfg, std::uint64_t stream,
                            SearchStats* stats = nullptr);

/// Re-applies the logged sequence to the target's program and returns the
/// prediction at the logged position.
int replay(const Counterexample& c, const AttackTarget& t, const Predictor& predict);

// ---------------------------------------------------------------------------
// Attribution

/// Normalised L1 norm of d loss / d input embedding, one entry per node.
/// The loss is -log p_target; `target` may be kAbstain. Uniform when the
/// gradient vanishes. Computed on the receptive-field subgraph of
/// `position`, which leaves the gradient unchanged.
std::vector<double> attribution(GnnModel& m, const Graph& encoded, NodeId position, int target);

/// g / |g|_1 for non-negative scores; uniform when g is all zero.
std::vector<double> normalize_scores(std::vector<double> g);

// ---------------------------------------------------------------------------
// Adversarial training and evaluation

struct AdversarialEpochStats {
  double loss = 0;
  std::size_t counterexamples = 0;
  std::vector<std::string> deltas;  // JSON of every training counterexample
};

/// One epoch: per batch, greedy search against the current model adds every
/// counterexample found to the batch next to the originals, then one Adam
/// step on the chosen loss.
AdversarialEpochStats adversarial_train_epoch(ModelBundle& bundle, Adam& adam, const Vocabulary& vocab,
                                              const std::vector<AttackTarget>& data, const AttackConfig& cfg,
                                              LossKind loss, double o, int epoch);

struct RobustnessBreakdown {
  double forall_correct = 0;
  double exists_incorrect = 0;
  double abstain = 0;
  std::size_t samples = 0;
};

struct RobustnessReport {
  std::size_t samples = 0;
  double accuracy = 0;    // unmodified prediction equals the label
  double robustness = 0;  // no counterexample found
  double abstain = 0;     // unmodified prediction abstains
  RobustnessBreakdown all;
  RobustnessBreakdown on_correct;    // samples predicted correctly unmodified
  RobustnessBreakdown on_abstained;  // samples abstained on unmodified
  RobustnessBreakdown on_incorrect;
  std::vector<Counterexample> counterexamples;
  SearchStats stats;
};

/// Greedy search on every target. Targets are searched on up to
/// `cfg.threads` workers; results do not depend on the worker count.
RobustnessReport evaluate_robustness(const std::vector<AttackTarget>& data, const Predictor& predict,
                                     const AttackConfig& cfg);

}  // namespace rct
