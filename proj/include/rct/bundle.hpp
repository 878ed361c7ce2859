#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <vector>

#include "rct/abstraction.hpp"
#include "rct/model.hpp"

namespace rct {

/// Positions whose value attribute is replaced by an annotation token.
using Annotations = std::map<NodeId, TypeLabel>;

/// Graph fed to a model: program graph, annotated values, edges filtered by
/// `alpha`, values encoded.
Graph model_input(const Program& p, const Annotations& ann, const Abstraction& alpha, const Vocabulary& vocab);

/// A trained model with its selection threshold and input abstraction.
struct ModelBundle {
  std::shared_ptr<GnnModel> model;
  double h = 0.5;
  Abstraction alpha = Abstraction::full();

  /// Label index, or kAbstain, per position.
  std::vector<int> predict(const Program& p, const Annotations& ann, const Vocabulary& vocab,
                           const std::vector<NodeId>& positions) const;

  /// Directory with `bundle.txt`, `model.ckpt` and `alpha.txt`.
  void save(const std::filesystem::path& dir) const;
  static ModelBundle load(const std::filesystem::path& dir);
};

struct StackPrediction {
  std::vector<int> labels;   // label index or kAbstain
  std::vector<int> claimed;  // bundle that predicted, or -1
};

/// Applies the bundles in order; each claims the positions it does not
/// abstain on and annotates them with its prediction for the later ones.
StackPrediction predict_stack(const std::vector<ModelBundle>& stack, const Vocabulary& vocab, const Program& p,
                              Annotations ann, const std::vector<NodeId>& positions);

/// `key=value` model settings as read back by `ModelBundle::load`.
void save_model_config(const ModelConfig& c, int vocab_size, std::ostream& out);

}  // namespace rct
