#include "rct/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "rct/log.hpp"

namespace rct {

std::vector<AttackTarget> make_targets(const DatasetBundle& d, const Dataset& split) {
  std::vector<AttackTarget> out;
  std::map<std::string, std::size_t> where;
  for (const Sample& s : split.samples) {
    auto [it, inserted] = where.emplace(s.program, out.size());
    if (inserted) {
      const CorpusProgram& cp = d.program(s.program);
      AttackTarget t;
      t.id = s.program;
      t.program = &cp.program;
      t.params = &cp.params;
      t.types = &cp.types;
      out.push_back(std::move(t));
    }
    AttackTarget& t = out[it->second];
    t.positions.push_back(s.position);
    t.labels.push_back(label_index(s.label));
  }
  return out;
}

std::size_t sample_count(const std::vector<AttackTarget>& targets) {
  std::size_t n = 0;
  for (const auto& t : targets) n += t.positions.size();
  return n;
}

EncodedSet encode_targets(const std::vector<AttackTarget>& targets, const Abstraction& alpha, const Vocabulary& vocab) {
  EncodedSet s;
  for (const AttackTarget& t : targets) {
    if (t.positions.empty()) continue;
    s.graphs.push_back(model_input(*t.program, t.annotations, alpha, vocab));
    s.examples.push_back({&s.graphs.back(), t.positions, t.labels});
  }
  return s;
}

// ---------------------------------------------------------------------------

double calibrate_threshold(std::vector<ScoredSample> scored, double t_acc) {
  if (t_acc <= 0) return 0.0;
  std::sort(scored.begin(), scored.end(), [](const ScoredSample& a, const ScoredSample& b) { return a.g > b.g; });
  double h = 1.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scored.size();) {
    // Admit every sample with this exact score together.
    std::size_t j = i;
    for (; j < scored.size() && scored[j].g == scored[i].g; ++j) correct += scored[j].correct ? 1 : 0;
    const double n = static_cast<double>(j);
    if (static_cast<double>(correct) >= t_acc * n - 1e-9 * n) h = scored[i].g;
    i = j;
  }
  return h;
}

std::vector<ScoredSample> score_samples(const ModelBundle& b, const std::vector<AttackTarget>& targets,
                                        const Vocabulary& vocab) {
  std::vector<ScoredSample> out;
  for (const AttackTarget& t : targets) {
    if (t.positions.empty()) continue;
    Graph g = model_input(*t.program, t.annotations, b.alpha, vocab);
    Mat probs = b.model->predict(g, t.positions);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      Selection s = select(probs.row(i), 0.0);
      out.push_back({s.g, label_index(s.label) == t.labels[static_cast<std::size_t>(i)]});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  model.validate();
  attack.validate();
  if (t_acc.empty()) throw std::invalid_argument("t_acc schedule is empty");
  for (double t : t_acc) {
    if (!(t >= 0 && t <= 1)) throw std::invalid_argument("t_acc must lie in [0, 1]");
    if (t > 0 && !(eps_acc > 0 && eps_acc < t)) throw std::invalid_argument("eps_acc must satisfy 0 < eps_acc < t_acc");
  }
  if (adversarial_epochs < 0) throw std::invalid_argument("adversarial_epochs must be >= 0");
  if (max_refinements < 0 || max_models < 0) throw std::invalid_argument("round limits must be >= 0");
  if (!(refine.threshold >= 0 && refine.threshold < 1)) throw std::invalid_argument("refine threshold must lie in [0, 1)");
  if (refine.max_samples == 0) throw std::invalid_argument("refine max_samples must be positive");
}

std::vector<double> schedule_for(double t_acc) {
  if (t_acc <= 0) return {1.0, 0.0};
  return {t_acc};
}

namespace {

double label_accuracy_of(const ModelBundle& b, const std::vector<AttackTarget>& data, const Vocabulary& vocab) {
  EncodedSet s = encode_targets(data, b.alpha, vocab);
  if (s.examples.empty()) return 0.0;
  return label_accuracy(*b.model, s.examples);
}

// Validation samples when there are any, the training samples otherwise.
const std::vector<AttackTarget>& calibration_set(const std::vector<AttackTarget>& train,
                                                 const std::vector<AttackTarget>& valid) {
  return sample_count(valid) > 0 ? valid : train;
}

}  // namespace

RobustTrainResult robust_train(const std::vector<AttackTarget>& train, const std::vector<AttackTarget>& valid,
                               const Vocabulary& vocab, const PipelineConfig& cfg, double t_acc,
                               std::uint64_t seed) {
  cfg.validate();
  if (sample_count(train) == 0) throw std::invalid_argument("robust_train: empty dataset");
  if (sample_count(valid) == 0) log_warn("robust_train: no validation samples, calibrating on training samples");
  const auto& calib = calibration_set(train, valid);
  const double t_weak = std::max(0.0, t_acc - cfg.eps_acc);
  // At t_acc = 0 the bundle is calibrated to h = 0 and never abstains, so the
  // abstain output only drains mass from the labels; train it as a classifier.
  const LossKind loss = t_acc > 0 ? LossKind::Abstain : LossKind::CrossEntropy;

  RobustTrainResult r;
  ModelConfig mc = cfg.model;
  mc.seed = seed;
  ModelBundle& b = r.bundle;
  b.model = std::make_shared<GnnModel>(mc, static_cast<int>(vocab.size()));
  b.alpha = Abstraction::full();
  {
    EncodedSet tr = encode_targets(train, b.alpha, vocab);
    EncodedSet va = encode_targets(valid, b.alpha, vocab);
    TrainOptions opts;
    opts.loss = loss;
    opts.epochs = mc.epochs;
    opts.log = cfg.log;
    rct::train(*b.model, tr.examples, va.examples, opts);
  }
  b.h = calibrate_threshold(score_samples(b, calib, vocab), t_weak);
  log_info("robust_train: initial model, h=" + std::to_string(b.h));

  std::size_t last = Abstraction::full().size();
  for (int round = 0; cfg.max_refinements == 0 || round < cfg.max_refinements; ++round) {
    RefineOptions ro = cfg.refine;
    ro.seed = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(round) + 0x4ef17eULL));
    RefineReport rep = refine_representation(train, b, vocab, ro);
    RefinementTrace tr;
    tr.alpha_size = rep.alpha.size();
    if (rep.alpha.size() >= last) {
      r.refinements.push_back(tr);
      log_info("robust_train: abstraction stopped shrinking at " + std::to_string(last) + " features");
      break;
    }
    tr.accepted = true;
    last = rep.alpha.size();
    b.alpha = rep.alpha;
    tr.valid_accuracy = label_accuracy_of(b, calib, vocab);

    AttackConfig ac = cfg.attack;
    ac.seed = splitmix64(cfg.attack.seed ^ splitmix64(seed + static_cast<std::uint64_t>(round)));
    Adam adam;
    for (int e = 0; e < cfg.adversarial_epochs; ++e) {
      const int epoch = mc.epochs + e;
      const double o = anneal(epoch, mc.resolved_n(), mc.resolved_k());
      AdversarialEpochStats st = adversarial_train_epoch(b, adam, vocab, train, ac, loss, o, epoch);
      tr.counterexamples += st.counterexamples;
      if (cfg.log)
        *cfg.log << "adversarial " << round << ' ' << epoch << ' ' << st.loss << ' ' << st.counterexamples << '\n';
    }
    b.h = calibrate_threshold(score_samples(b, calib, vocab), t_weak);
    r.refinements.push_back(tr);
    log_info("robust_train: refinement " + std::to_string(round) + " kept " + std::to_string(last) +
             " features, " + std::to_string(tr.counterexamples) + " counterexamples");
  }
  r.h_train = b.h;
  b.h = calibrate_threshold(score_samples(b, calib, vocab), t_acc);
  return r;
}

ApplyResult apply_model(const ModelBundle& b, const std::vector<AttackTarget>& targets, const Vocabulary& vocab,
                        bool annotate_truth) {
  ApplyResult r;
  for (const AttackTarget& t : targets) {
    if (t.positions.empty()) continue;
    std::vector<int> pred = b.predict(*t.program, t.annotations, vocab, t.positions);
    AttackTarget rest = t;
    rest.positions.clear();
    rest.labels.clear();
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
      ++r.total;
      if (pred[i] == kAbstain) {
        rest.positions.push_back(t.positions[i]);
        rest.labels.push_back(t.labels[i]);
      } else {
        ++r.predicted;
        rest.annotations[t.positions[i]] = label_from_index(annotate_truth ? t.labels[i] : pred[i]);
      }
    }
    if (!rest.positions.empty()) r.abstained.push_back(std::move(rest));
  }
  return r;
}

PipelineResult accurate_and_robust_train(const std::vector<AttackTarget>& train,
                                         const std::vector<AttackTarget>& valid, const Vocabulary& vocab,
                                         const PipelineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PipelineResult res;
  std::vector<AttackTarget> d = train, v = valid;
  // `step` indexes the schedule: it advances after every round, and a round
  // that claims nothing ends the loop only on the last entry.
  std::size_t step = 0;
  for (std::size_t round = 0;; ++round) {
    if (sample_count(d) == 0) break;
    if (cfg.max_models > 0 && res.models.size() >= static_cast<std::size_t>(cfg.max_models)) break;
    const bool last_step = step + 1 >= cfg.t_acc.size();
    const double t = cfg.t_acc[std::min(step, cfg.t_acc.size() - 1)];
    if (!last_step) ++step;
    RoundTrace trace;
    trace.t_acc = t;
    trace.train_samples = sample_count(d);
    RobustTrainResult rt = robust_train(d, v, vocab, cfg, t, splitmix64(seed ^ splitmix64(round + 0x51a6ULL)));
    ApplyResult applied = apply_model(rt.bundle, d, vocab, true);
    trace.claimed = applied.predicted;
    trace.h = rt.bundle.h;
    trace.alpha_size = rt.bundle.alpha.size();
    trace.refinements = rt.refinements;
    trace.kept = applied.predicted > 0;
    res.rounds.push_back(trace);
    log_info("pipeline: round " + std::to_string(round) + " t_acc=" + std::to_string(t) + " claimed " +
             std::to_string(applied.predicted) + "/" + std::to_string(applied.total));
    if (!trace.kept) {
      if (last_step) break;
      continue;
    }
    res.models.push_back(std::move(rt.bundle));
    d = std::move(applied.abstained);
    v = apply_model(res.models.back(), v, vocab, false).abstained;
  }
  return res;
}

ModelBundle train_baseline(const std::vector<AttackTarget>& train, const std::vector<AttackTarget>& valid,
                           const Vocabulary& vocab, const ModelConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (sample_count(train) == 0) throw std::invalid_argument("train_baseline: empty dataset");
  ModelBundle b;
  b.model = std::make_shared<GnnModel>(cfg, static_cast<int>(vocab.size()));
  b.h = 0.0;
  EncodedSet tr = encode_targets(train, b.alpha, vocab);
  EncodedSet va = encode_targets(valid, b.alpha, vocab);
  TrainOptions opts;
  opts.loss = LossKind::CrossEntropy;
  opts.anneal = false;
  opts.epochs = cfg.epochs;
  opts.log = log;
  rct::train(*b.model, tr.examples, va.examples, opts);
  return b;
}

}  // namespace rct
