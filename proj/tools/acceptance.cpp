// Acceptance run: one PASS/FAIL line per criterion. A criterion passes when
// its check holds and it finished within its time limit. Exit code 0 iff
// every selected criterion passed.

#include <CLI11.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "flow_oracle.hpp"
#include "gradcheck.hpp"
#include "label_preservation.hpp"
#include "op_cases.hpp"
#include "rct/log.hpp"
#include "rct/pipeline.hpp"
#include "rename_oracle.hpp"
#include "six_node.hpp"
#include "toy.hpp"

namespace fs = std::filesystem;
using namespace rct;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string pct(double x) { return fmt::format("{:.2f}%", 100 * x); }

// Settings of the trained-model criteria. The corpus and split are the CLI
// defaults; the model and the adversarial loop are scaled down to fit the
// time limits on one core.
const std::vector<std::pair<std::string, std::string>> kScaledDown = {
    {"embed", "32"}, {"hidden", "32"}, {"epochs", "8"}, {"attack_budget", "10"}, {"adversarial_epochs", "3"},
};

// Corpus, dataset and models shared by the trained-model criteria, built on
// first use.
class Fixture {
 public:
  Fixture(cli::Config cfg, fs::path work) : cfg_(std::move(cfg)), work_(std::move(work)) {}

  const cli::Config& config() const { return cfg_; }

  const Vocabulary& vocab() {
    data();
    return vocab_;
  }
  const std::vector<AttackTarget>& train() { return data().train; }
  const std::vector<AttackTarget>& valid() { return data().valid; }
  const std::vector<AttackTarget>& test() { return data().test; }

  std::vector<const Program*> train_programs() {
    std::vector<const Program*> out;
    for (const auto& t : train()) out.push_back(t.program);
    return out;
  }

  AttackConfig eval_attack(std::uint64_t seed, int budget) {
    AttackConfig a = cfg_.attack(vocab(), train_programs(), "eval_budget");
    a.seed = seed;
    a.budget = budget;
    return a;
  }

  const ModelBundle& baseline() {
    if (!baseline_) {
      log_info("fixture: training the baseline");
      baseline_ = train_baseline(train(), valid(), vocab(), cfg_.model());
    }
    return *baseline_;
  }

  const PipelineResult& pipeline() {
    if (!pipeline_) {
      log_info("fixture: training the pipeline at t_acc 0");
      PipelineConfig pc = cfg_.pipeline(vocab(), train_programs());
      pc.t_acc = schedule_for(0.0);
      pipeline_ = accurate_and_robust_train(train(), valid(), vocab(), pc, pc.model.seed);
    }
    return *pipeline_;
  }

  // Test-split evaluation at the configured evaluation budget, cached.
  const RobustnessReport& baseline_report() {
    if (!baseline_report_) baseline_report_ = evaluate(bundle_predictor(baseline(), vocab()));
    return *baseline_report_;
  }
  const RobustnessReport& pipeline_report() {
    if (!pipeline_report_) pipeline_report_ = evaluate(stack_predictor(pipeline().models, vocab()));
    return *pipeline_report_;
  }

 private:
  struct Data {
    DatasetBundle bundle;
    std::vector<AttackTarget> train, valid, test;
  };

  Data& data() {
    if (data_) return *data_;
    const fs::path corpus = work_ / "corpus", dataset = work_ / "data";
    fs::remove_all(corpus);
    fs::remove_all(dataset);
    write_corpus(corpus, static_cast<int>(cfg_.integer("corpus_programs")), cfg_.stream("corpus"),
                 cfg_.generator());
    build_dataset(corpus, dataset, cfg_.build_options());
    data_ = std::make_unique<Data>();
    data_->bundle = load_dataset_dir(dataset);
    data_->train = make_targets(data_->bundle, data_->bundle.train);
    data_->valid = make_targets(data_->bundle, data_->bundle.valid);
    data_->test = make_targets(data_->bundle, data_->bundle.test);
    std::vector<const Program*> programs;
    for (const auto& t : data_->train) programs.push_back(t.program);
    vocab_ = Vocabulary::build(programs, static_cast<int>(cfg_.integer("vocab_min_count")));
    log_info(fmt::format("fixture: {} train, {} valid, {} test samples", sample_count(data_->train),
                         sample_count(data_->valid), sample_count(data_->test)));
    return *data_;
  }

  RobustnessReport evaluate(const Predictor& p) {
    return evaluate_robustness(test(), p,
                               eval_attack(cfg_.stream("evaluate"), static_cast<int>(cfg_.integer("eval_budget"))));
  }

  cli::Config cfg_;
  fs::path work_;
  std::unique_ptr<Data> data_;
  Vocabulary vocab_;
  std::optional<ModelBundle> baseline_;
  std::optional<PipelineResult> pipeline_;
  std::optional<RobustnessReport> baseline_report_, pipeline_report_;
};

// --- criteria ----------------------------------------------------------------

Outcome six_node_instance(Fixture&) {
  using namespace testing::six_node;
  Graph g = six_node_graph();
  FlowProblem p = build_flow_problem({six_node_input(g)}, 0.05);
  FlowSolution s = solve(p);
  std::vector<std::string> bad;
  if (!s.exact) bad.push_back("not solved exactly");
  for (std::size_t q = 0; q < p.features.size(); ++q) {
    const bool paid = p.features[q] == kQ3 || p.features[q] == kQ7;
    if (s.capacity[q] != (paid ? 70 : 0))
      bad.push_back(fmt::format("feature {} costs {}", p.features[q].str(), s.capacity[q]));
  }
  if (!verify_certificate(p, s)) bad.push_back("certificate rejected");
  Abstraction alpha = extract_abstraction(p, s);
  if (!(alpha == Abstraction({kQ3, kQ7}))) bad.push_back("abstraction differs");
  Graph a = apply_abstraction(alpha, g);
  std::vector<std::pair<int, int>> kept;
  for (const Edge& e : a.edges) kept.emplace_back(e.src + 1, e.dst + 1);
  std::sort(kept.begin(), kept.end());
  if (kept != std::vector<std::pair<int, int>>{{3, 1}, {5, 2}, {6, 3}}) bad.push_back("kept edges differ");
  std::string detail = fmt::format("objective {}, {} features kept", s.objective, alpha.size());
  for (const auto& b : bad) detail += "; " + b;
  return {bad.empty(), detail};
}

Outcome solver_vs_oracle(Fixture&) {
  std::mt19937_64 rng(42);
  int agree = 0;
  std::string first;
  const int problems = 50;
  for (int it = 0; it < problems; ++it) {
    const int features = 2 + static_cast<int>(rng() % 9);
    FlowProblem p = testing::random_flow_problem(rng, features, 30);
    FlowSolution s = solve(p);
    auto o = testing::BruteForceOracle(p).run();
    if (s.exact && s.objective == o.objective && verify_certificate(p, s))
      ++agree;
    else if (first.empty())
      first = fmt::format("; problem {}: solver {} oracle {}", it, s.objective, o.objective);
  }
  return {agree == problems, fmt::format("{}/{} objectives equal{}", agree, problems, first)};
}

Outcome loss_identities(Fixture&) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0, worst_abstain = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Mat q(1, kOutputCount);
    for (int i = 0; i < kOutputCount; ++i) q(0, i) = u(rng) + 1e-3;
    q(0, kAbstain) = 0;
    q /= q.sum();
    const int y = trial % kTypeLabelCount;
    worst = std::max(worst, std::abs(abstain_cross_entropy(q, y, 1.0) - cross_entropy(q, y)));
    Mat a = Mat::Zero(1, kOutputCount);
    a(0, kAbstain) = 1;
    worst_abstain = std::max(worst_abstain, std::abs(abstain_cross_entropy(a, y, 1 + 8 * u(rng))));
  }
  const double start = anneal(0, 3, 5), end = anneal(1000000, 3, 5);
  const bool ok = worst < 1e-12 && worst_abstain == 0.0 && start == 9.0 && end == 1.0;
  return {ok, fmt::format("max |ACE-CE| {:.2e}, max ACE at p_abstain=1 {:.2e}, o(0)={}, o(inf)={}", worst,
                          worst_abstain, start, end)};
}

Outcome gradient_suite(Fixture&) {
  if constexpr (sizeof(Scalar) != 8) return {false, "tensor engine is not 64-bit"};
  std::mt19937_64 rng(42);
  double op_worst = 0;
  std::string worst_name;
  for (const auto& c : testing::op_cases()) {
    auto r = testing::check_op(c, rng);
    if (r.checked == 0) return {false, std::string(c.name) + " checked nothing"};
    if (r.max_rel_err >= op_worst) {
      op_worst = r.max_rel_err;
      worst_name = c.name;
    }
  }
  auto toy = testing::make_toy(2, 7);
  ModelConfig mc = testing::tiny_model(3);
  mc.embed = 8;
  mc.hidden = 8;
  mc.steps = 2;
  GnnModel m(mc, static_cast<int>(toy.vocab.size()));
  Graph g = model_input(*toy.targets[0].program, {}, Abstraction::full(), toy.vocab);
  BatchGraph b;
  b.append(g);
  std::vector<int> positions(toy.targets[0].positions.begin(), toy.targets[0].positions.end());
  double model_worst = 0;
  for (LossKind kind : {LossKind::CrossEntropy, LossKind::Abstain}) {
    auto loss = [&](Tape& t, std::vector<Var>&) {
      auto out = m.forward(t, b, positions);
      return loss_on_tape(t, out.probs, toy.targets[0].labels, kind, 3.0);
    };
    model_worst = std::max(model_worst, testing::grad_check(m.params, loss, 1e-5, 10).max_rel_err);
  }
  return {op_worst < 1e-4 && model_worst < 1e-3,
          fmt::format("{} ops, worst op rel err {:.2e} ({}), model rel err {:.2e}", testing::op_cases().size(),
                      op_worst, worst_name, model_worst)};
}

Outcome label_preservation(Fixture&) {
  auto r = testing::check_label_preservation(1000);
  std::string detail = fmt::format("{}/{} pairs preserved, classes seen {}", r.pairs - r.failures, r.pairs,
                                   r.seen.size());
  if (!r.messages.empty()) detail += "; " + r.messages.front();
  return {r.pairs == 1000 && r.failures == 0 && r.seen.size() == 4, detail};
}

Outcome never_mispredict(Fixture& fx) {
  ModelConfig mc = fx.config().model();
  EncodedSet train = encode_targets(fx.train(), Abstraction::full(), fx.vocab());
  EncodedSet valid = encode_targets(fx.valid(), Abstraction::full(), fx.vocab());
  ModelBundle b;
  b.model = std::make_shared<GnnModel>(mc, static_cast<int>(fx.vocab().size()));
  TrainOptions opts;
  opts.loss = LossKind::Abstain;
  opts.epochs = mc.epochs;
  rct::train(*b.model, train.examples, valid.examples, opts);
  b.h = calibrate_threshold(score_samples(b, fx.train(), fx.vocab()), 1.0);
  std::size_t total = 0, predicted = 0, wrong = 0;
  for (const auto& t : fx.train()) {
    auto pred = b.predict(*t.program, t.annotations, fx.vocab(), t.positions);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      ++total;
      if (pred[i] == kAbstain) continue;
      ++predicted;
      if (pred[i] != t.labels[i]) ++wrong;
    }
  }
  const double coverage = total ? static_cast<double>(predicted) / static_cast<double>(total) : 0;
  return {wrong == 0 && predicted > 0,
          fmt::format("h={:.4f}, coverage {} of {} training samples, {} mis-predictions", b.h, pct(coverage),
                      total, wrong)};
}

Outcome robustness_trend(Fixture& fx) {
  const RobustnessReport& base = fx.baseline_report();
  const RobustnessReport& pipe = fx.pipeline_report();
  const double gain = pipe.robustness - base.robustness;
  return {gain >= 0.10 && base.robustness < base.accuracy,
          fmt::format("baseline acc {} rob {}; pipeline ({} bundles) acc {} rob {} abstain {}; gain {:+.2f} pp",
                      pct(base.accuracy), pct(base.robustness), fx.pipeline().models.size(), pct(pipe.accuracy),
                      pct(pipe.robustness), pct(pipe.abstain), 100 * gain)};
}

Outcome degenerate_metrics(Fixture&) {
  auto toy = testing::make_toy(20, 11);
  ModelBundle abstainer;
  abstainer.model = std::make_shared<GnnModel>(testing::tiny_model(), static_cast<int>(toy.vocab.size()));
  abstainer.h = 1.0;
  AttackConfig cfg = testing::toy_attack(toy.vocab, 20);
  RobustnessReport r = evaluate_robustness(toy.targets, bundle_predictor(abstainer, toy.vocab), cfg);
  double worst_sum = 0;
  for (const RobustnessBreakdown* b : {&r.all, &r.on_correct, &r.on_abstained, &r.on_incorrect}) {
    if (b->samples == 0) continue;
    worst_sum = std::max(worst_sum, std::abs(b->forall_correct + b->exists_incorrect + b->abstain - 1.0));
  }
  return {r.samples > 0 && r.accuracy == 0.0 && r.robustness == 1.0 && worst_sum < 1e-12,
          fmt::format("{} samples, accuracy {}, robustness {}, max |breakdown sum - 1| {:.1e}", r.samples,
                      r.accuracy, r.robustness, worst_sum)};
}

// Samples (program, position) that have a counterexample.
std::set<std::pair<std::string, NodeId>> broken(const RobustnessReport& r) {
  std::set<std::pair<std::string, NodeId>> s;
  for (const auto& c : r.counterexamples) s.emplace(c.program, c.position);
  return s;
}

// Frozen models: the baseline over three attack seeds, then the trained
// pipeline stack, whose replays go through annotations and several bundles.
Outcome attack_soundness(Fixture& fx) {
  std::map<std::string, const AttackTarget*> by_id;
  for (const auto& t : fx.test()) by_id[t.id] = &t;
  const int hi = static_cast<int>(fx.config().integer("eval_budget"));

  std::size_t replayed = 0, mismatched = 0, violations = 0;
  std::string detail;
  auto check = [&](const std::string& name, const Predictor& pred, std::uint64_t seed,
                   const RobustnessReport* cached_high) {
    RobustnessReport low = evaluate_robustness(fx.test(), pred, fx.eval_attack(seed, 20));
    RobustnessReport high = cached_high ? *cached_high : evaluate_robustness(fx.test(), pred, fx.eval_attack(seed, hi));
    for (const RobustnessReport* r : {&low, &high})
      for (const auto& c : r->counterexamples) {
        const Counterexample back = Counterexample::from_line(c.to_line());
        ++replayed;
        if (replay(back, *by_id.at(back.program), pred) != back.predicted) ++mismatched;
      }
    // Budget 230 explores a superset of the budget-20 sequences.
    auto lo_set = broken(low), hi_set = broken(high);
    if (high.robustness > low.robustness || !std::includes(hi_set.begin(), hi_set.end(), lo_set.begin(), lo_set.end()))
      ++violations;
    detail += fmt::format("; {}: {} at 20, {} at {}", name, pct(low.robustness), pct(high.robustness), hi);
  };

  const std::uint64_t seed = fx.config().stream("evaluate");
  Predictor base = bundle_predictor(fx.baseline(), fx.vocab());
  check("baseline seed 0", base, seed, &fx.baseline_report());
  check("baseline seed 1", base, seed + 1, nullptr);
  check("baseline seed 2", base, seed + 2, nullptr);
  check("pipeline", stack_predictor(fx.pipeline().models, fx.vocab()), seed, &fx.pipeline_report());
  return {mismatched == 0 && violations == 0 && replayed > 0,
          fmt::format("{} of {} counterexamples replay{}", replayed - mismatched, replayed, detail)};
}

Outcome rename_verification(Fixture& fx) {
  const ModelBundle& b = fx.baseline();
  const std::size_t wanted = 8;
  const std::size_t small_cone = 2000;  // enumerations allowed per sample
  std::size_t verified = 0, confirmed = 0, tried = 0, max_cone = 0, variants = 0;
  std::string first;
  for (const auto& t : fx.test()) {
    for (std::size_t i = 0; i < t.positions.size() && verified < wanted; ++i) {
      ++tried;
      VerifyResult v = exhaustive_verify_renamings(b, fx.vocab(), t, i, small_cone);
      if (v.status != VerifyStatus::Verified || v.variables == 0) continue;
      ++verified;
      max_cone = std::max(max_cone, v.cone_nodes);
      auto o = testing::full_rename_enumeration(b, fx.vocab(), t, i);
      variants += o.variants;
      if (!o.counterexample && o.variants > 0)
        ++confirmed;
      else if (first.empty())
        first = fmt::format("; {} position {} refuted by the full enumeration", t.id, t.positions[i]);
    }
    if (verified >= wanted) break;
  }
  return {verified >= 5 && confirmed == verified,
          fmt::format("{} verified samples with renameable variables (of {} tried, cones up to {} nodes), {} "
                      "confirmed by {} full-enumeration variants{}",
                      verified, tried, max_cone, confirmed, variants, first)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  Outcome (*run)(Fixture&);
};

const Criterion kCriteria[] = {
    {1, "six-node refinement instance", 1, six_node_instance},
    {2, "exact solver agrees with exhaustive oracle", 60, solver_vs_oracle},
    {3, "abstain loss identities and annealing endpoints", 5, loss_identities},
    {4, "finite-difference gradient suite", 120, gradient_suite},
    {5, "label preservation of modifications", 60, label_preservation},
    {6, "abstain training never mis-predicts on its data", 15 * 60, never_mispredict},
    {7, "pipeline robustness over baseline", 60 * 60, robustness_trend},
    {8, "always-abstain metrics", 1, degenerate_metrics},
    {9, "counterexample replay and budget monotonicity", 10 * 60, attack_soundness},
    {10, "exhaustive rename verification", 10 * 60, rename_verification},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runs the acceptance criteria and prints one PASS/FAIL line each."};
  std::vector<int> only;
  std::vector<std::string> sets;
  std::string work;
  bool quiet = false;
  app.add_option("--only", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--set", sets, "config override key=value for the trained-model criteria");
  app.add_option("--work", work, "directory for the generated corpus and dataset");
  app.add_flag("--quiet", quiet, "no progress logging");
  CLI11_PARSE(app, argc, argv);

  set_log_level(quiet ? LogLevel::Warn : LogLevel::Info);
  cli::Config cfg;
  try {
    for (const auto& [k, v] : kScaledDown) cfg.set(k, v, "acceptance");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw cli::UsageError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1), "--set");
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  const fs::path dir = work.empty() ? fs::temp_directory_path() / fmt::format("rct_acceptance_{}", ::getpid())
                                    : fs::path(work);
  fs::create_directories(dir);
  Fixture fx(cfg, dir);

  int failed = 0, ran = 0;
  for (const Criterion& c : kCriteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(fx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.ok && secs < c.limit_s;
    if (!pass) ++failed;
    std::cout << fmt::format("{} {:>2} {}  [{:.2f}s / {:.0f}s]  {}{}\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                             c.limit_s, o.detail, o.ok && !pass ? "; over the time limit" : "")
              << std::flush;
  }
  std::cout << fmt::format("{}/{} criteria passed\n", ran - failed, ran);
  if (work.empty()) fs::remove_all(dir);
  return failed == 0 ? 0 : 1;
}
