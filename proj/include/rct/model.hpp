#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rct/graph.hpp"
#include "rct/tensor.hpp"

namespace rct {

inline constexpr int kOutputCount = kTypeLabelCount + 1;
inline constexpr int kAbstain = kTypeLabelCount;  // output column of the abstain label

struct ModelConfig {
  int embed = 128;
  int hidden = 128;  // inner width of the feed-forward sublayer
  int steps = 4;
  double dropout = 0.1;
  int batch = 32;
  int epochs = 10;
  int anneal_n = -1;  // -1: ceil(epochs / 4)
  int anneal_k = -1;  // -1: ceil(epochs / 2)
  std::uint64_t seed = 0;

  int resolved_n() const;
  int resolved_k() const;
  void validate() const;
};

/// Several program graphs laid out as one disconnected graph.
struct BatchGraph {
  std::vector<int> kinds;
  std::vector<int> values;
  std::vector<Edge> edges;
  std::vector<int> offsets;  // first node of each member graph

  void append(const Graph& g);
  std::size_t num_nodes() const { return kinds.size(); }
};

class GnnModel {
 public:
  GnnModel(const ModelConfig& cfg, int vocab_size);

  struct Output {
    Var h0;      // input embedding per node (N x embed)
    Var logits;  // one row per queried position (P x 10)
    Var probs;
  };

  /// T rounds of attention-weighted message passing over in-edges, then the
  /// output layer at `positions` (indices into the batch's node list).
  Output forward(Tape& tape, const BatchGraph& g, const std::vector<int>& positions);

  /// Eval-mode probabilities, one row per position.
  Mat predict(const Graph& g, const std::vector<int>& positions);

  ModelConfig config;
  int vocab_size;
  ParameterStore params;

 private:
  Parameter* type_emb_;
  Parameter* value_emb_;
  Parameter* wq_;
  std::array<Parameter*, kEdgeTypeCount> wk_{};
  std::array<Parameter*, kEdgeTypeCount> wv_{};
  Parameter *w1_, *b1_, *w2_, *b2_, *wo_, *bo_;
};

// ---------------------------------------------------------------------------
// Losses and selection

/// -log p_y with p clamped at 1e-12.
double cross_entropy(const Mat& probs_row, int y);
/// -log(p_y * o + p_abstain), clamped at 1e-12.
double abstain_cross_entropy(const Mat& probs_row, int y, double o);

enum class LossKind { CrossEntropy, Abstain };

/// Mean loss over the rows of `probs` on a tape.
Var loss_on_tape(Tape& t, Var probs, const std::vector<int>& labels, LossKind kind, double o);

/// Non-abstain reward weight o for an epoch: 9 before n, linear to 1 over
/// the next k epochs, 1 afterwards.
double anneal(int epoch, int n, int k);

struct Selection {
  bool abstain = true;
  TypeLabel label = TypeLabel::Unk;  // argmax of the renormalized 9-way distribution
  double g = 0;                      // 1 - p_abstain
  std::array<double, kTypeLabelCount> renormalized{};
};

/// Predicts iff g >= h and h < 1; h = 1 abstains everywhere.
Selection select(const Mat& probs_row, double h);

// ---------------------------------------------------------------------------
// Training

/// All queried positions of one program.
struct Example {
  const Graph* graph = nullptr;
  std::vector<int> positions;
  std::vector<int> labels;  // label index, or kAbstain as a training target
};

struct TrainOptions {
  LossKind loss = LossKind::Abstain;
  int epochs = 10;
  int first_epoch = 0;        // offset into the annealing schedule
  bool anneal = true;         // false: o = 1 throughout
  bool keep_best = true;      // restore the best-validation parameters
  std::ostream* log = nullptr;  // `epoch loss train_acc valid_acc o_value`
};

struct TrainResult {
  std::vector<double> epoch_loss;
  double best_valid_acc = -1;
  int best_epoch = -1;
};

/// One Adam step on the mean loss over `batch`.
double train_step(GnnModel& m, Adam& adam, const std::vector<const Example*>& batch, LossKind loss, double o,
                  std::uint64_t dropout_key);

/// Argmax accuracy over the 9 labels (abstain ignored) on the examples.
double label_accuracy(GnnModel& m, const std::vector<Example>& data);

TrainResult train(GnnModel& m, const std::vector<Example>& train, const std::vector<Example>& valid,
                  const TrainOptions& opts);

/// Groups of consecutive examples whose sample count first reaches `batch`.
std::vector<std::vector<const Example*>> make_batches(const std::vector<const Example*>& shuffled, int batch);

}  // namespace rct
