#include "rct/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace rct {

int ModelConfig::resolved_n() const { return anneal_n >= 0 ? anneal_n : (epochs + 3) / 4; }
int ModelConfig::resolved_k() const { return anneal_k >= 0 ? anneal_k : (epochs + 1) / 2; }

void ModelConfig::validate() const {
  if (embed <= 0 || hidden <= 0 || steps <= 0 || batch <= 0 || epochs <= 0)
    throw std::invalid_argument("model config: sizes, steps, batch and epochs must be positive");
  if (dropout < 0 || dropout >= 1) throw std::invalid_argument("model config: dropout must lie in [0, 1)");
}

void BatchGraph::append(const Graph& g) {
  if (g.values.size() != g.kinds.size()) throw std::invalid_argument("graph values not encoded");
  int off = static_cast<int>(kinds.size());
  offsets.push_back(off);
  for (NodeKind k : g.kinds) kinds.push_back(static_cast<int>(k));
  values.insert(values.end(), g.values.begin(), g.values.end());
  for (const Edge& e : g.edges) edges.push_back({e.src + off, e.dst + off, e.type});
}

GnnModel::GnnModel(const ModelConfig& cfg, int vocab) : config(cfg), vocab_size(vocab) {
  cfg.validate();
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x696e6974ULL));
  const int d = cfg.embed;
  type_emb_ = &params.add("type_emb", kNodeKindCount, d, rng);
  value_emb_ = &params.add("value_emb", vocab, d, rng);
  wq_ = &params.add("wq", d, d, rng);
  for (int t = 0; t < kEdgeTypeCount; ++t) {
    std::string name(edge_type_name(static_cast<EdgeType>(t)));
    wk_[t] = &params.add("wk_" + name, d, d, rng);
    wv_[t] = &params.add("wv_" + name, d, d, rng);
  }
  w1_ = &params.add("ffn_w1", d, cfg.hidden, rng);
  b1_ = &params.add_zeros("ffn_b1", 1, cfg.hidden);
  w2_ = &params.add("ffn_w2", cfg.hidden, d, rng);
  b2_ = &params.add_zeros("ffn_b2", 1, d);
  wo_ = &params.add("out_w", d, kOutputCount, rng);
  bo_ = &params.add_zeros("out_b", 1, kOutputCount);
}

GnnModel::Output GnnModel::forward(Tape& t, const BatchGraph& g, const std::vector<int>& positions) {
  const int n = static_cast<int>(g.num_nodes());
  for (int v : g.values)
    if (v < 0 || v >= vocab_size) throw std::out_of_range("value index " + std::to_string(v) + " outside vocabulary");

  // Edges grouped by type; messages are concatenated in this order.
  std::array<std::vector<int>, kEdgeTypeCount> src;
  std::vector<int> dst;
  {
    std::array<std::vector<int>, kEdgeTypeCount> dst_t;
    for (const Edge& e : g.edges) {
      int ty = static_cast<int>(e.type);
      if (ty < 0 || ty >= kEdgeTypeCount) throw std::invalid_argument("unknown edge type " + std::to_string(ty));
      src[ty].push_back(e.src);
      dst_t[ty].push_back(e.dst);
    }
    for (auto& d : dst_t) dst.insert(dst.end(), d.begin(), d.end());
  }

  Var wq = t.param(*wq_);
  std::array<Var, kEdgeTypeCount> wk, wv;
  for (int ty = 0; ty < kEdgeTypeCount; ++ty) {
    wk[ty] = t.param(*wk_[ty]);
    wv[ty] = t.param(*wv_[ty]);
  }
  Var w1 = t.param(*w1_), b1 = t.param(*b1_), w2 = t.param(*w2_), b2 = t.param(*b2_);
  const Scalar inv_sqrt_d = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(config.embed)));
  const auto p = static_cast<Scalar>(config.dropout);

  Var h0 = t.add(t.gather_rows(t.param(*type_emb_), g.kinds), t.gather_rows(t.param(*value_emb_), g.values));
  Var h = h0;
  for (int step = 0; step < config.steps; ++step) {
    if (!dst.empty()) {
      std::vector<Var> keys, vals;
      for (int ty = 0; ty < kEdgeTypeCount; ++ty) {
        if (src[ty].empty()) continue;
        Var hs = t.gather_rows(h, src[ty]);
        keys.push_back(t.matmul(hs, wk[ty]));
        vals.push_back(t.matmul(hs, wv[ty]));
      }
      Var k = keys.size() == 1 ? keys[0] : t.concat_rows(keys);
      Var v = vals.size() == 1 ? vals[0] : t.concat_rows(vals);
      Var q = t.gather_rows(t.matmul(h, wq), dst);
      Var score = t.scale(t.rowdot(q, k), inv_sqrt_d);
      Var alpha = t.segment_softmax(score, dst, n);
      Var m = t.segment_sum(t.mul_col(v, alpha), dst, n);
      h = t.add(h, t.dropout(m, p));
    }
    Var f = t.add_row(t.matmul(t.relu(t.add_row(t.matmul(h, w1), b1)), w2), b2);
    h = t.add(h, t.dropout(f, p));
  }
  for (int pos : positions)
    if (pos < 0 || pos >= n) throw std::out_of_range("position " + std::to_string(pos) + " outside graph");
  Var logits = t.add_row(t.matmul(t.gather_rows(h, positions), t.param(*wo_)), t.param(*bo_));
  return {h0, logits, t.softmax_rows(logits)};
}

Mat GnnModel::predict(const Graph& g, const std::vector<int>& positions) {
  BatchGraph b;
  b.append(g);
  Tape t(false);
  return forward(t, b, positions).probs.value();
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kClamp = 1e-12;
}

double cross_entropy(const Mat& p, int y) { return -std::log(std::max(static_cast<double>(p(0, y)), kClamp)); }

double abstain_cross_entropy(const Mat& p, int y, double o) {
  return -std::log(std::max(static_cast<double>(p(0, y)) * o + static_cast<double>(p(0, kAbstain)), kClamp));
}

Var loss_on_tape(Tape& t, Var probs, const std::vector<int>& labels, LossKind kind, double o) {
  const int n = static_cast<int>(labels.size());
  if (n == 0 || probs.rows() != n) throw ShapeError("loss: label count does not match predictions");
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  Var py = t.pick(probs, rows, labels);
  Var inner = py;
  if (kind == LossKind::Abstain) inner = t.add(t.scale(py, static_cast<Scalar>(o)), t.col(probs, kAbstain));
  return t.scale(t.sum(t.log(inner)), static_cast<Scalar>(-1.0 / n));
}

double anneal(int epoch, int n, int k) {
  const double top = kTypeLabelCount;
  if (epoch < n) return top;
  if (epoch >= n + k || k <= 0) return 1.0;
  return top - (top - 1.0) * static_cast<double>(epoch - n) / static_cast<double>(k);
}

Selection select(const Mat& p, double h) {
  Selection s;
  double mass = 0;
  for (int i = 0; i < kTypeLabelCount; ++i) mass += static_cast<double>(p(0, i));
  s.g = 1.0 - static_cast<double>(p(0, kAbstain));
  int best = 0;
  for (int i = 0; i < kTypeLabelCount; ++i) {
    s.renormalized[static_cast<std::size_t>(i)] = mass > 0 ? static_cast<double>(p(0, i)) / mass : 1.0 / kTypeLabelCount;
    if (p(0, i) > p(0, best)) best = i;
  }
  s.label = label_from_index(best);
  s.abstain = !(s.g >= h && h < 1.0);
  return s;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<const Example*>> make_batches(const std::vector<const Example*>& shuffled, int batch) {
  std::vector<std::vector<const Example*>> out;
  std::vector<const Example*> cur;
  std::size_t count = 0;
  for (const Example* e : shuffled) {
    if (e->positions.empty()) continue;
    cur.push_back(e);
    count += e->positions.size();
    if (count >= static_cast<std::size_t>(batch)) {
      out.push_back(std::move(cur));
      cur.clear();
      count = 0;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double train_step(GnnModel& m, Adam& adam, const std::vector<const Example*>& batch, LossKind loss, double o,
                  std::uint64_t dropout_key) {
  BatchGraph g;
  std::vector<int> positions, labels;
  for (const Example* e : batch) {
    int off = static_cast<int>(g.num_nodes());
    g.append(*e->graph);
    for (int p : e->positions) positions.push_back(p + off);
    labels.insert(labels.end(), e->labels.begin(), e->labels.end());
  }
  Tape t;
  t.training = true;
  t.dropout_key = dropout_key;
  auto out = m.forward(t, g, positions);
  Var l = loss_on_tape(t, out.probs, labels, loss, o);
  double value = static_cast<double>(l.value()(0, 0));
  t.backward(l);
  adam.step(m.params);
  return value;
}

double label_accuracy(GnnModel& m, const std::vector<Example>& data) {
  std::size_t correct = 0, total = 0;
  for (const auto& e : data) {
    if (e.positions.empty()) continue;
    Mat p = m.predict(*e.graph, e.positions);
    for (std::size_t i = 0; i < e.positions.size(); ++i) {
      Selection s = select(p.row(static_cast<Eigen::Index>(i)), 0.0);
      correct += label_index(s.label) == e.labels[i];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

TrainResult train(GnnModel& m, const std::vector<Example>& train_set, const std::vector<Example>& valid,
                  const TrainOptions& opts) {
  std::size_t samples = 0;
  for (const auto& e : train_set) samples += e.positions.size();
  if (samples == 0) throw std::invalid_argument("train: empty dataset");
  const ModelConfig& cfg = m.config;
  Adam adam;
  TrainResult r;
  std::optional<ParameterStore> best;
  std::vector<const Example*> order;
  for (const auto& e : train_set) order.push_back(&e);
  const int n = cfg.resolved_n(), k = cfg.resolved_k();

  for (int e = 0; e < opts.epochs; ++e) {
    const int epoch = opts.first_epoch + e;
    double o = opts.anneal ? anneal(epoch, n, k) : 1.0;
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(epoch) + 0x5348554646ULL)));
    std::vector<const Example*> shuffled = order;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    double total = 0;
    auto batches = make_batches(shuffled, cfg.batch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::uint64_t key = splitmix64(cfg.seed ^ splitmix64((static_cast<std::uint64_t>(epoch) << 32) | b));
      total += train_step(m, adam, batches[b], opts.loss, o, key);
    }
    double loss = total / static_cast<double>(batches.size());
    r.epoch_loss.push_back(loss);
    double train_acc = opts.log ? label_accuracy(m, train_set) : 0.0;
    double valid_acc = valid.empty() ? 0.0 : label_accuracy(m, valid);
    if (opts.log)
      *opts.log << epoch << ' ' << loss << ' ' << train_acc << ' ' << valid_acc << ' ' << o << std::endl;
    if (opts.keep_best && !valid.empty() && valid_acc > r.best_valid_acc) {
      r.best_valid_acc = valid_acc;
      r.best_epoch = epoch;
      best = m.params.clone();
    }
  }
  if (best) {
    for (std::size_t i = 0; i < m.params.size(); ++i) m.params[i].value = (*best)[i].value;
  }
  return r;
}

}  // namespace rct
