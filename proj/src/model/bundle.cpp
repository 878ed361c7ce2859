#include "rct/bundle.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "rct/dataset.hpp"

namespace rct {

Graph model_input(const Program& p, const Annotations& ann, const Abstraction& alpha, const Vocabulary& vocab) {
  Graph g = apply_abstraction(alpha, build_graph(p));
  for (auto [id, label] : ann) g.words.at(static_cast<std::size_t>(id)) = annotation_word(label);
  encode_values(g, vocab);
  return g;
}

std::vector<int> ModelBundle::predict(const Program& p, const Annotations& ann, const Vocabulary& vocab,
                                      const std::vector<NodeId>& positions) const {
  std::vector<int> out;
  if (positions.empty()) return out;
  Graph g = model_input(p, ann, alpha, vocab);
  Mat probs = model->predict(g, positions);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Selection s = select(probs.row(i), h);
    out.push_back(s.abstain ? kAbstain : label_index(s.label));
  }
  return out;
}

StackPrediction predict_stack(const std::vector<ModelBundle>& stack, const Vocabulary& vocab, const Program& p,
                              Annotations ann, const std::vector<NodeId>& positions) {
  StackPrediction r;
  r.labels.assign(positions.size(), kAbstain);
  r.claimed.assign(positions.size(), -1);
  for (std::size_t b = 0; b < stack.size(); ++b) {
    std::vector<NodeId> open;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < positions.size(); ++i)
      if (r.claimed[i] < 0) {
        open.push_back(positions[i]);
        where.push_back(i);
      }
    if (open.empty()) break;
    std::vector<int> pred = stack[b].predict(p, ann, vocab, open);
    for (std::size_t j = 0; j < open.size(); ++j) {
      if (pred[j] == kAbstain) continue;
      r.labels[where[j]] = pred[j];
      r.claimed[where[j]] = static_cast<int>(b);
      ann[open[j]] = label_from_index(pred[j]);
    }
  }
  return r;
}

void save_model_config(const ModelConfig& c, int vocab_size, std::ostream& out) {
  out << "embed=" << c.embed << "\nhidden=" << c.hidden << "\nsteps=" << c.steps << "\ndropout=" << c.dropout
      << "\nbatch=" << c.batch << "\nepochs=" << c.epochs << "\nanneal_n=" << c.anneal_n
      << "\nanneal_k=" << c.anneal_k << "\nseed=" << c.seed << "\nvocab_size=" << vocab_size << '\n';
}

void ModelBundle::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir / "bundle.txt");
  if (!meta) throw std::runtime_error("cannot write " + (dir / "bundle.txt").string());
  meta.precision(17);
  save_model_config(model->config, model->vocab_size, meta);
  meta << "h=" << h << '\n';
  model->params.save(dir / "model.ckpt");
  alpha.save(dir / "alpha.txt");
}

ModelBundle ModelBundle::load(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "bundle.txt");
  if (!meta) throw DataError("cannot read " + (dir / "bundle.txt").string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(meta, line);) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw DataError((dir / "bundle.txt").string() + ": missing key " + k);
    return it->second;
  };
  ModelConfig c;
  c.embed = std::stoi(get("embed"));
  c.hidden = std::stoi(get("hidden"));
  c.steps = std::stoi(get("steps"));
  c.dropout = std::stod(get("dropout"));
  c.batch = std::stoi(get("batch"));
  c.epochs = std::stoi(get("epochs"));
  c.anneal_n = std::stoi(get("anneal_n"));
  c.anneal_k = std::stoi(get("anneal_k"));
  c.seed = std::stoull(get("seed"));
  ModelBundle b;
  b.model = std::make_shared<GnnModel>(c, std::stoi(get("vocab_size")));
  b.model->params.load(dir / "model.ckpt");
  b.h = std::stod(get("h"));
  b.alpha = Abstraction::load(dir / "alpha.txt");
  return b;
}

}  // namespace rct
