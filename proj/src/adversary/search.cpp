#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rct/adversary.hpp"

namespace rct {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::mt19937_64 sequence_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t j) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream ^ splitmix64(j + 0x5eedULL))));
}

// Labels of the tracked positions survive the modification.
bool labels_preserved(const AttackTarget& t, const Program& modified) {
  try {
    TypeMap after = infer_types(modified, BuiltinTable::standard(), *t.params);
    for (auto [id, label] : *t.types) {
      auto it = after.find(id);
      if (it == after.end() || it->second != label) return false;
    }
    return true;
  } catch (const TypeError&) {
    return false;
  }
}

std::size_t position_index(const AttackTarget& t, NodeId pos) {
  auto it = std::find(t.positions.begin(), t.positions.end(), pos);
  if (it == t.positions.end()) throw std::invalid_argument("position " + std::to_string(pos) + " is not a sample");
  return static_cast<std::size_t>(it - t.positions.begin());
}

}  // namespace

Predictor bundle_predictor(const ModelBundle& b, const Vocabulary& vocab) {
  return [&b, &vocab](const AttackTarget& t, const Program& p) {
    return b.predict(p, t.annotations, vocab, t.positions);
  };
}

Predictor stack_predictor(const std::vector<ModelBundle>& stack, const Vocabulary& vocab) {
  return [&stack, &vocab](const AttackTarget& t, const Program& p) {
    return predict_stack(stack, vocab, p, t.annotations, t.positions).labels;
  };
}

std::string Counterexample::to_line() const {
  return program + "\t" + std::to_string(position) + "\t" + delta_to_json(delta) + "\t" +
         std::string(predicted == kAbstain ? "abstain" : label_name(label_from_index(predicted))) + "\t" +
         std::string(label_name(label_from_index(expected)));
}

Counterexample Counterexample::from_line(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    f.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (f.size() != 5) throw std::invalid_argument("counterexample line needs 5 tab-separated fields");
  auto label = [](const std::string& s) {
    if (s == "abstain") return kAbstain;
    auto l = label_from_name(s);
    if (!l) throw std::invalid_argument("unknown label '" + s + "'");
    return label_index(*l);
  };
  Counterexample c;
  c.program = f[0];
  c.position = std::stoi(f[1]);
  c.delta = delta_from_json(f[2]);
  c.predicted = label(f[3]);
  c.expected = label(f[4]);
  return c;
}

int replay(const Counterexample& c, const AttackTarget& t, const Predictor& predict) {
  std::size_t applied = 0;
  Program x = apply_delta(*t.program, c.delta, &applied);
  if (applied != c.delta.size()) throw std::runtime_error("counterexample for " + c.program + " has a stale step");
  return predict(t, x)[position_index(t, c.position)];
}

// ---------------------------------------------------------------------------

std::vector<SampleOutcome> greedy_search(const AttackTarget& t, const Predictor& predict, const AttackConfig& cfg,
                                         std::uint64_t stream, SearchStats* stats) {
  cfg.validate();
  const std::size_t n = t.positions.size();
  std::vector<SampleOutcome> out(n);
  if (n == 0) return out;
  SearchStats local;
  SearchStats& st = stats ? *stats : local;

  auto record = [&](const std::vector<int>& pred, const DeltaSeq& d, bool original, std::vector<std::size_t>& broken) {
    for (std::size_t i = 0; i < n; ++i) {
      if (out[i].counterexample) continue;
      if (original) {
        out[i].original_abstain = pred[i] == kAbstain;
        out[i].original_correct = pred[i] == t.labels[i];
      }
      if (pred[i] != t.labels[i]) out[i].all_correct = false;
      if (pred[i] != kAbstain && pred[i] != t.labels[i]) {
        out[i].counterexample = Counterexample{t.id, t.positions[i], d, pred[i], t.labels[i]};
        broken.push_back(i);
      }
    }
  };

  std::vector<std::size_t> broken;
  record(predict(t, *t.program), {}, true, broken);
  broken.clear();

  std::vector<ModSite> sites = modification_sites(*t.program, *t.types);
  std::vector<NodeId> nodes;
  for (const auto& s : sites)
    if (nodes.empty() || nodes.back() != s.node) nodes.push_back(s.node);
  PositionSampler uniform(nodes, {}, 1.0);
  if (nodes.empty()) return out;

  for (int j = 0; j < cfg.budget; ++j) {
    if (std::all_of(out.begin(), out.end(), [](const SampleOutcome& o) { return o.counterexample.has_value(); }))
      break;
    auto rng = sequence_rng(cfg.seed, stream, static_cast<std::uint64_t>(j));
    DeltaSeq d = sample_delta(*t.program, sites, uniform, cfg, rng);
    ++st.explored;
    if (d.empty()) continue;
    Program x = apply_delta(*t.program, d);
    if (!labels_preserved(t, x)) {
      ++st.rejected;
      continue;
    }
    broken.clear();
    record(predict(t, x), d, false, broken);
    // Fresh replay of each newly found counterexample.
    if (!broken.empty()) {
      std::vector<int> again = predict(t, apply_delta(*t.program, d));
      for (std::size_t i : broken)
        if (again[i] != out[i].counterexample->predicted)
          throw std::logic_error("counterexample for " + t.id + " did not replay");
    }
  }
  return out;
}

SampleOutcome guided_search(const AttackTarget& t, std::size_t sample, const std::vector<double>& attribution,
                            const Predictor& predict, const AttackConfig& cfg, std::uint64_t stream,
                            SearchStats* stats) {
  cfg.validate();
  if (sample >= t.positions.size()) throw std::out_of_range("guided search: sample index out of range");
  SearchStats local;
  SearchStats& st = stats ? *stats : local;
  SampleOutcome out;
  const int y = t.labels[sample];

  auto check = [&](const std::vector<int>& pred, const DeltaSeq& d) {
    int p = pred[sample];
    if (p != y) out.all_correct = false;
    if (p != kAbstain && p != y) {
      out.counterexample = Counterexample{t.id, t.positions[sample], d, p, y};
      return true;
    }
    return false;
  };
  std::vector<int> pred0 = predict(t, *t.program);
  out.original_abstain = pred0[sample] == kAbstain;
  out.original_correct = pred0[sample] == y;
  if (check(pred0, {})) return out;

  std::vector<ModSite> sites = modification_sites(*t.program, *t.types);
  std::vector<NodeId> nodes;
  for (const auto& s : sites)
    if (nodes.empty() || nodes.back() != s.node) nodes.push_back(s.node);
  if (nodes.empty()) return out;
  PositionSampler sampler(nodes, attribution, cfg.epsilon);

  for (int j = 0; j < cfg.budget; ++j) {
    auto rng = sequence_rng(cfg.seed, stream ^ (0x9u + sample), static_cast<std::uint64_t>(j));
    DeltaSeq d = sample_delta(*t.program, sites, sampler, cfg, rng);
    ++st.explored;
    if (d.empty()) continue;
    Program x = apply_delta(*t.program, d);
    if (!labels_preserved(t, x)) {
      ++st.rejected;
      continue;
    }
    if (check(predict(t, x), d)) {
      if (predict(t, apply_delta(*t.program, d))[sample] != out.counterexample->predicted)
        throw std::logic_error("counterexample for " + t.id + " did not replay");
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> attribution(GnnModel& m, const Graph& g, NodeId position, int target) {
  const std::size_t n = g.num_nodes();
  if (position < 0 || static_cast<std::size_t>(position) >= n)
    throw std::out_of_range("attribution: position outside graph");
  // Nodes within `steps` reverse hops; their induced subgraph determines
  // the output at `position` exactly.
  std::vector<std::vector<int>> in(n);
  for (const Edge& e : g.edges) in[static_cast<std::size_t>(e.dst)].push_back(e.src);
  std::vector<int> dist(n, -1);
  std::vector<int> frontier{position};
  dist[static_cast<std::size_t>(position)] = 0;
  for (int step = 0; step < m.config.steps && !frontier.empty(); ++step) {
    std::vector<int> next;
    for (int v : frontier)
      for (int u : in[static_cast<std::size_t>(v)])
        if (dist[static_cast<std::size_t>(u)] < 0) {
          dist[static_cast<std::size_t>(u)] = step + 1;
          next.push_back(u);
        }
    frontier = std::move(next);
  }
  std::vector<int> local(n, -1), members;
  for (std::size_t v = 0; v < n; ++v)
    if (dist[v] >= 0) {
      local[v] = static_cast<int>(members.size());
      members.push_back(static_cast<int>(v));
    }
  BatchGraph sub;
  sub.offsets.push_back(0);
  for (int v : members) {
    sub.kinds.push_back(static_cast<int>(g.kinds[static_cast<std::size_t>(v)]));
    sub.values.push_back(g.values.at(static_cast<std::size_t>(v)));
  }
  for (const Edge& e : g.edges) {
    int s = local[static_cast<std::size_t>(e.src)], d = local[static_cast<std::size_t>(e.dst)];
    if (s >= 0 && d >= 0) sub.edges.push_back({s, d, e.type});
  }

  Tape t;
  auto out = m.forward(t, sub, {local[static_cast<std::size_t>(position)]});
  Var loss = t.scale(t.log(t.col(out.probs, target)), -1);
  t.backward(loss);
  Mat grad = t.grad(out.h0);
  m.params.zero_grad();

  std::vector<double> score(n, 0.0);
  for (std::size_t i = 0; i < members.size(); ++i)
    score[static_cast<std::size_t>(members[i])] = static_cast<double>(grad.row(static_cast<Eigen::Index>(i)).cwiseAbs().sum());
  return normalize_scores(std::move(score));
}

std::vector<double> normalize_scores(std::vector<double> g) {
  double total = 0;
  for (double x : g) total += x;
  if (total > 0) {
    for (double& x : g) x /= total;
  } else {
    std::fill(g.begin(), g.end(), 1.0 / static_cast<double>(g.size()));
  }
  return g;
}

// ---------------------------------------------------------------------------

AdversarialEpochStats adversarial_train_epoch(ModelBundle& bundle, Adam& adam, const Vocabulary& vocab,
                                              const std::vector<AttackTarget>& data, const AttackConfig& cfg,
                                              LossKind loss, double o, int epoch) {
  GnnModel& m = *bundle.model;
  AdversarialEpochStats st;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(epoch) + 0xadULL)));
  std::shuffle(order.begin(), order.end(), rng);
  Predictor predict = bundle_predictor(bundle, vocab);

  std::size_t batches = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::deque<Graph> graphs;
    std::vector<Example> examples;
    std::size_t count = 0;
    for (; i < order.size() && count < static_cast<std::size_t>(m.config.batch); ++i) {
      const AttackTarget& t = data[order[i]];
      if (t.positions.empty()) continue;
      count += t.positions.size();
      graphs.push_back(model_input(*t.program, t.annotations, bundle.alpha, vocab));
      examples.push_back({&graphs.back(), t.positions, t.labels});
      std::uint64_t stream = fnv1a(t.id) ^ splitmix64(static_cast<std::uint64_t>(epoch) + 1);
      auto outcomes = greedy_search(t, predict, cfg, stream);
      // One extra example per distinct sequence, holding the samples it broke.
      std::map<std::string, Example> by_delta;
      std::map<std::string, const DeltaSeq*> seqs;
      for (std::size_t k = 0; k < outcomes.size(); ++k) {
        const auto& ce = outcomes[k].counterexample;
        if (!ce || ce->delta.empty()) continue;
        std::string key = delta_to_json(ce->delta);
        by_delta[key].positions.push_back(t.positions[k]);
        by_delta[key].labels.push_back(t.labels[k]);
        seqs[key] = &ce->delta;
      }
      for (auto& [key, ex] : by_delta) {
        graphs.push_back(model_input(apply_delta(*t.program, *seqs[key]), t.annotations, bundle.alpha, vocab));
        ex.graph = &graphs.back();
        st.counterexamples += ex.positions.size();
        st.deltas.push_back(t.id + " " + key);
        count += ex.positions.size();
        examples.push_back(std::move(ex));
      }
    }
    if (examples.empty()) continue;
    std::vector<const Example*> ptrs;
    for (const auto& e : examples) ptrs.push_back(&e);
    std::uint64_t key = splitmix64(m.config.seed ^ splitmix64((static_cast<std::uint64_t>(epoch) << 32) | batches));
    st.loss += train_step(m, adam, ptrs, loss, o, key);
    ++batches;
  }
  if (batches) st.loss /= static_cast<double>(batches);
  return st;
}

RobustnessReport evaluate_robustness(const std::vector<AttackTarget>& data, const Predictor& predict,
                                     const AttackConfig& cfg) {
  RobustnessReport r;
  struct Acc {
    std::size_t n = 0, fc = 0, ei = 0, ab = 0;
    void add(const SampleOutcome& o) {
      ++n;
      if (o.counterexample) ++ei;
      else if (o.all_correct) ++fc;
      else ++ab;
    }
    RobustnessBreakdown done() const {
      RobustnessBreakdown b;
      b.samples = n;
      if (n) {
        b.forall_correct = static_cast<double>(fc) / static_cast<double>(n);
        b.exists_incorrect = static_cast<double>(ei) / static_cast<double>(n);
        b.abstain = static_cast<double>(ab) / static_cast<double>(n);
      }
      return b;
    }
  } all, correct, abstained, incorrect;
  std::size_t acc = 0, abst = 0;
  std::vector<std::vector<SampleOutcome>> per_target(data.size());
  std::vector<SearchStats> per_stats(data.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    try {
      for (std::size_t i; (i = next.fetch_add(1)) < data.size();)
        per_target[i] = greedy_search(data[i], predict, cfg, fnv1a(data[i].id), &per_stats[i]);
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = data.size();
    }
  };
  std::size_t workers = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(data.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t i = 0; i < data.size(); ++i) {
    r.stats.explored += per_stats[i].explored;
    r.stats.rejected += per_stats[i].rejected;
    for (const auto& o : per_target[i]) {
      all.add(o);
      if (o.original_correct) correct.add(o), ++acc;
      else if (o.original_abstain) abstained.add(o), ++abst;
      else incorrect.add(o);
      if (o.counterexample) r.counterexamples.push_back(*o.counterexample);
    }
  }
  r.samples = all.n;
  r.all = all.done();
  r.on_correct = correct.done();
  r.on_abstained = abstained.done();
  r.on_incorrect = incorrect.done();
  if (r.samples) {
    r.accuracy = static_cast<double>(acc) / static_cast<double>(r.samples);
    r.abstain = static_cast<double>(abst) / static_cast<double>(r.samples);
    r.robustness = 1.0 - r.all.exists_incorrect;
  }
  return r;
}

}  // namespace rct
