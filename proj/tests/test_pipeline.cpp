#include <algorithm>
#include <filesystem>
#include <random>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rct/pipeline.hpp"
#include "rename_oracle.hpp"
#include "toy.hpp"

using namespace rct;
using rct::testing::make_toy;
using rct::testing::tiny_model;
using rct::testing::toy_attack;

namespace {

ModelBundle random_bundle(const Vocabulary& vocab, std::uint64_t seed, double h) {
  ModelBundle b;
  b.model = std::make_shared<GnnModel>(tiny_model(seed), static_cast<int>(vocab.size()));
  b.h = h;
  return b;
}

PipelineConfig small_pipeline(const Vocabulary& vocab) {
  PipelineConfig c;
  c.model = tiny_model(3);
  c.model.epochs = 3;
  c.attack = toy_attack(vocab, 2);
  c.adversarial_epochs = 1;
  c.refine.max_samples = 200;
  return c;
}

// Fraction of {g >= h} that is correct; 1 when the subset is empty.
double accuracy_above(const std::vector<ScoredSample>& s, double h) {
  std::size_t n = 0, c = 0;
  for (const auto& x : s)
    if (x.g >= h && h < 1.0) {
      ++n;
      c += x.correct;
    }
  return n ? static_cast<double>(c) / static_cast<double>(n) : 1.0;
}

std::size_t coverage(const std::vector<ScoredSample>& s, double h) {
  if (h >= 1.0) return 0;
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [h](const ScoredSample& x) { return x.g >= h; }));
}

}  // namespace

// ---------------------------------------------------------------------------
// Calibration

TEST_CASE("calibration on a step profile finds the step") {
  std::vector<ScoredSample> s;
  for (int i = 0; i <= 100; ++i) {
    const double g = i / 100.0;
    s.push_back({g, g >= 0.7});
  }
  CHECK(calibrate_threshold(s, 1.0) == doctest::Approx(0.7));
  CHECK(calibrate_threshold(s, 0.0) == 0.0);
  CHECK(calibrate_threshold(s, -1.0) == 0.0);
  // 70 wrong out of 101: admitting everything gives 31/101.
  CHECK(calibrate_threshold(s, 31.0 / 101.0) == 0.0);
}

TEST_CASE("calibration with nothing qualifying abstains everywhere") {
  std::vector<ScoredSample> s{{0.9, false}, {0.5, false}, {0.2, true}};
  CHECK(calibrate_threshold(s, 0.5) == 1.0);
  CHECK(calibrate_threshold({}, 0.9) == 1.0);
  CHECK(calibrate_threshold({}, 0.0) == 0.0);
}

TEST_CASE("tied scores are admitted together") {
  // Splitting the tie would let a prefix of the 0.8 group reach accuracy 1.
  std::vector<ScoredSample> s{{0.9, true}, {0.8, true}, {0.8, false}, {0.1, true}};
  CHECK(calibrate_threshold(s, 1.0) == doctest::Approx(0.9));
  CHECK(calibrate_threshold(s, 0.75) == doctest::Approx(0.1));
  CHECK(calibrate_threshold(s, 2.0 / 3.0) == doctest::Approx(0.1));
}

TEST_CASE("calibration properties on random score tables") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<ScoredSample> s(1 + rng() % 40);
    for (auto& x : s) {
      x.g = std::round(u(rng) * 20) / 20;  // ties are common
      x.correct = u(rng) < x.g;
    }
    double prev_cov = static_cast<double>(s.size()) + 1;
    for (double t : {0.0, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      const double h = calibrate_threshold(s, t);
      CHECK(accuracy_above(s, h) >= t - 1e-12);
      const double cov = static_cast<double>(coverage(s, h));
      CHECK(cov <= prev_cov);
      prev_cov = cov;
      // Minimality: no observed score below h qualifies.
      for (const auto& x : s)
        if (x.g < h && t > 0) CHECK(accuracy_above(s, x.g) < t);
    }
  }
}

// ---------------------------------------------------------------------------
// Model application

TEST_CASE("apply_model partitions positions and annotates the claimed ones") {
  auto toy = make_toy(6, 40);
  const std::size_t n = toy.samples();

  ModelBundle all = random_bundle(toy.vocab, 8, 0.0);
  ApplyResult a = apply_model(all, toy.targets, toy.vocab, true);
  CHECK(a.total == n);
  CHECK(a.predicted == n);
  CHECK(a.abstained.empty());

  ModelBundle none = random_bundle(toy.vocab, 8, 1.0);
  ApplyResult z = apply_model(none, toy.targets, toy.vocab, true);
  CHECK(z.predicted == 0);
  REQUIRE(z.abstained.size() == toy.targets.size());
  for (std::size_t i = 0; i < z.abstained.size(); ++i) {
    CHECK(z.abstained[i].positions == toy.targets[i].positions);
    CHECK(z.abstained[i].labels == toy.targets[i].labels);
    CHECK(z.abstained[i].annotations.empty());
  }

  // Threshold at the median score claims part of the data.
  auto scores = score_samples(all, toy.targets, toy.vocab);
  std::vector<double> gs;
  for (const auto& s : scores) gs.push_back(s.g);
  std::nth_element(gs.begin(), gs.begin() + static_cast<long>(gs.size() / 2), gs.end());
  ModelBundle half = random_bundle(toy.vocab, 8, gs[gs.size() / 2]);
  for (bool truth : {true, false}) {
    ApplyResult r = apply_model(half, toy.targets, toy.vocab, truth);
    std::size_t left = 0;
    for (const auto& t : r.abstained) left += t.positions.size();
    CHECK(left + r.predicted == r.total);
    CHECK(r.predicted > 0);
    CHECK(left > 0);
    for (const auto& t : r.abstained) {
      const auto& orig = *std::find_if(toy.targets.begin(), toy.targets.end(),
                                       [&](const AttackTarget& o) { return o.id == t.id; });
      auto pred = half.predict(*orig.program, {}, toy.vocab, orig.positions);
      std::size_t claimed = 0;
      for (std::size_t i = 0; i < orig.positions.size(); ++i) {
        const bool kept = std::count(t.positions.begin(), t.positions.end(), orig.positions[i]) > 0;
        CHECK(kept == (pred[i] == kAbstain));
        if (kept) {
          CHECK(t.annotations.count(orig.positions[i]) == 0);
        } else {
          ++claimed;
          REQUIRE(t.annotations.count(orig.positions[i]) == 1);
          CHECK(label_index(t.annotations.at(orig.positions[i])) == (truth ? orig.labels[i] : pred[i]));
        }
      }
      CHECK(t.annotations.size() == claimed);
    }
  }
}

TEST_CASE("a claimed position carries its annotation token in the model input") {
  auto toy = make_toy(3, 45);
  ModelBundle none = random_bundle(toy.vocab, 8, 1.0);
  const AttackTarget& t = toy.targets[0];
  // Claim exactly one position through a one-sample target.
  AttackTarget one = t;
  one.positions = {t.positions[0]};
  one.labels = {t.labels[0]};
  ApplyResult r = apply_model(random_bundle(toy.vocab, 8, 0.0), {one}, toy.vocab, true);
  CHECK(r.abstained.empty());
  AttackTarget rest = t;
  rest.positions.erase(rest.positions.begin());
  rest.labels.erase(rest.labels.begin());
  ApplyResult z = apply_model(none, {rest}, toy.vocab, true);
  REQUIRE(z.abstained.size() == 1);
  CHECK(z.abstained[0].annotations.empty());

  Annotations ann{{t.positions[0], label_from_index(t.labels[0])}};
  Graph g = model_input(*t.program, ann, Abstraction::full(), toy.vocab);
  const auto pos = static_cast<std::size_t>(t.positions[0]);
  CHECK(g.words[pos] == annotation_word(label_from_index(t.labels[0])));
  CHECK(g.values[pos] == Vocabulary::annotation_index(label_from_index(t.labels[0])));
}

// ---------------------------------------------------------------------------
// Training loops

TEST_CASE("a model that predicts everything ends the multi-model loop") {
  auto toy = make_toy(4, 55);
  PipelineConfig cfg = small_pipeline(toy.vocab);
  cfg.t_acc = {0.0};
  cfg.max_refinements = 1;
  cfg.adversarial_epochs = 0;
  PipelineResult r = accurate_and_robust_train(toy.targets, {}, toy.vocab, cfg, 7);
  CHECK(r.models.size() == 1);
  REQUIRE(r.rounds.size() == 1);
  CHECK(r.rounds[0].claimed == toy.samples());
}

TEST_CASE("robust_train shrinks the abstraction until it stops") {
  auto toy = make_toy(8, 50);
  std::vector<AttackTarget> train(toy.targets.begin(), toy.targets.begin() + 6);
  std::vector<AttackTarget> valid(toy.targets.begin() + 6, toy.targets.end());
  PipelineConfig cfg = small_pipeline(toy.vocab);

  RobustTrainResult r = robust_train(train, valid, toy.vocab, cfg, 1.0, 21);
  REQUIRE_FALSE(r.refinements.empty());
  std::size_t last = Abstraction::full().size();
  for (std::size_t i = 0; i < r.refinements.size(); ++i) {
    const auto& f = r.refinements[i];
    if (i + 1 < r.refinements.size()) {
      CHECK(f.accepted);
      CHECK(f.alpha_size < last);
      last = f.alpha_size;
    } else {
      // The loop ends on the first refinement that does not shrink.
      CHECK_FALSE(f.accepted);
      CHECK(f.alpha_size >= last);
    }
  }
  CHECK(r.bundle.alpha.size() == last);

  // Final h meets t_acc = 1 on the calibration samples.
  auto s = score_samples(r.bundle, valid, toy.vocab);
  CHECK(accuracy_above(s, r.bundle.h) == doctest::Approx(1.0));
  CHECK(r.bundle.h == calibrate_threshold(s, 1.0));
}

TEST_CASE("a zero-target model is trained as a plain classifier") {
  auto toy = make_toy(6, 65);
  PipelineConfig cfg = small_pipeline(toy.vocab);
  cfg.model.epochs = 6;
  cfg.max_refinements = 1;
  cfg.adversarial_epochs = 2;
  RobustTrainResult r = robust_train(toy.targets, {}, toy.vocab, cfg, 0.0, 8);
  CHECK(r.bundle.h == 0.0);
  // Cross entropy never targets the abstain column, so its mass drains away.
  EncodedSet s = encode_targets(toy.targets, r.bundle.alpha, toy.vocab);
  double abstain = 0;
  std::size_t n = 0;
  for (const Example& e : s.examples) {
    Mat p = r.bundle.model->predict(*e.graph, e.positions);
    abstain += p.col(kAbstain).sum();
    n += e.positions.size();
  }
  REQUIRE(n > 0);
  CHECK(abstain / static_cast<double>(n) < 0.05);
}

TEST_CASE("robust_train respects max_refinements") {
  auto toy = make_toy(5, 60);
  PipelineConfig cfg = small_pipeline(toy.vocab);
  cfg.max_refinements = 1;
  cfg.adversarial_epochs = 0;
  RobustTrainResult r = robust_train(toy.targets, {}, toy.vocab, cfg, 0.5, 4);
  CHECK(r.refinements.size() == 1);
}

TEST_CASE("multi-model training is deterministic and partitions the data") {
  auto toy = make_toy(8, 70);
  std::vector<AttackTarget> train(toy.targets.begin(), toy.targets.begin() + 6);
  std::vector<AttackTarget> valid(toy.targets.begin() + 6, toy.targets.end());
  PipelineConfig cfg = small_pipeline(toy.vocab);
  cfg.t_acc = schedule_for(0.0);
  cfg.max_refinements = 1;

  PipelineResult a = accurate_and_robust_train(train, valid, toy.vocab, cfg, 99);
  PipelineResult b = accurate_and_robust_train(train, valid, toy.vocab, cfg, 99);
  REQUIRE(a.models.size() == b.models.size());
  REQUIRE_FALSE(a.models.empty());
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    CHECK(a.models[i].h == b.models[i].h);
    CHECK(a.models[i].alpha == b.models[i].alpha);
  }

  // Rounds consume the training samples: claims never overlap, and the last
  // t_acc = 0 round predicts everything left.
  std::size_t claimed = 0;
  for (const auto& r : a.rounds) {
    CHECK(r.train_samples == sample_count(train) - claimed);
    claimed += r.claimed;
  }
  CHECK(claimed == sample_count(train));
  CHECK(a.models.size() ==
        static_cast<std::size_t>(std::count_if(a.rounds.begin(), a.rounds.end(), [](const RoundTrace& r) { return r.kept; })));
  CHECK(a.rounds.back().t_acc == 0.0);
  CHECK(a.models.back().h == 0.0);

  for (const auto& t : toy.targets) {
    StackPrediction pa = predict_stack(a.models, toy.vocab, *t.program, {}, t.positions);
    StackPrediction pb = predict_stack(b.models, toy.vocab, *t.program, {}, t.positions);
    CHECK(pa.labels == pb.labels);
    CHECK(pa.claimed == pb.claimed);
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
      CHECK(pa.claimed[i] >= 0);  // the final model never abstains
      CHECK(pa.labels[i] != kAbstain);
    }
  }
}

TEST_CASE("pipeline configuration validation") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  c.t_acc = {};
  CHECK_THROWS(c.validate());
  c.t_acc = {1.2};
  CHECK_THROWS(c.validate());
  c.t_acc = {0.5};
  c.eps_acc = 0.6;
  CHECK_THROWS(c.validate());
  c.eps_acc = 0.02;
  c.adversarial_epochs = -1;
  CHECK_THROWS(c.validate());
  CHECK(schedule_for(0.0) == std::vector<double>{1.0, 0.0});
  CHECK(schedule_for(0.9) == std::vector<double>{0.9});
}

// ---------------------------------------------------------------------------
// Verification

TEST_CASE("dependency cone on a chain") {
  Graph g;
  g.kinds.assign(4, NodeKind::Identifier);
  g.values = {0, 0, 0, 0};
  g.words = {"", "", "", ""};
  g.edges = {{0, 1, EdgeType::Ast}, {1, 2, EdgeType::Ast}, {2, 3, EdgeType::Ast}};
  auto c = dependency_cone(g, 3, 2);
  CHECK(c == std::vector<bool>{false, true, true, true});
  CHECK(dependency_cone(g, 3, 0) == std::vector<bool>{false, false, false, true});
  CHECK(dependency_cone(g, 0, 5) == std::vector<bool>{true, false, false, false});
}

TEST_CASE("rename candidates exclude program names and include one outside word") {
  auto toy = make_toy(4, 80);
  const Program& p = *toy.targets[0].program;
  auto names = rename_candidates(p, toy.vocab);
  auto used = program_names(p);
  std::size_t outside = 0;
  for (const auto& w : names) {
    CHECK(usable_rename(w));
    CHECK(std::find(used.begin(), used.end(), w) == used.end());
    outside += !toy.vocab.contains(w);
  }
  CHECK(outside == 1);
}

TEST_CASE("verification agrees with full enumeration") {
  auto toy = make_toy(5, 90);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ModelBundle b = random_bundle(toy.vocab, seed, 0.0);
    for (const auto& t : toy.targets) {
      for (std::size_t i = 0; i < t.positions.size(); i += 3) {
        VerifyResult v = exhaustive_verify_renamings(b, toy.vocab, t, i, 1u << 20);
        auto oracle = rct::testing::full_rename_enumeration(b, toy.vocab, t, i);
        const int orig = b.predict(*t.program, t.annotations, toy.vocab, {t.positions[i]})[0];
        const bool orig_bad = orig != kAbstain && orig != t.labels[i];
        CHECK(v.status != VerifyStatus::UnverifiedBudget);
        CHECK((v.status == VerifyStatus::Counterexample) == (orig_bad || oracle.counterexample.has_value()));
        if (v.counterexample) {
          CHECK(replay(*v.counterexample, t, bundle_predictor(b, toy.vocab)) == v.counterexample->predicted);
          CHECK(v.counterexample->predicted != t.labels[i]);
        }
      }
    }
  }
}

TEST_CASE("a model blind to values is verified") {
  auto toy = make_toy(4, 100);
  ModelBundle b = random_bundle(toy.vocab, 6, 0.0);
  for (std::size_t i = 0; i < b.model->params.size(); ++i)
    if (b.model->params[i].name == "value_emb") b.model->params[i].value.setZero();
  // Label every sample with the model's own prediction so the original is correct.
  for (auto t : toy.targets) {
    auto pred = b.predict(*t.program, t.annotations, toy.vocab, t.positions);
    t.labels = pred;
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
      VerifyResult v = exhaustive_verify_renamings(b, toy.vocab, t, i, 1u << 20);
      CHECK(v.status == VerifyStatus::Verified);
      CHECK((v.enumerated > 0) == (v.variables > 0));
      CHECK_FALSE(rct::testing::full_rename_enumeration(b, toy.vocab, t, i).counterexample);
    }
  }
}

TEST_CASE("verification reports an exhausted budget") {
  auto toy = make_toy(3, 110);
  ModelBundle b = random_bundle(toy.vocab, 6, 1.0);  // abstains: originals are fine
  const AttackTarget* t = nullptr;
  std::size_t sample = 0;
  for (const auto& c : toy.targets)
    for (std::size_t i = 0; i < c.positions.size() && !t; ++i)
      if (exhaustive_verify_renamings(b, toy.vocab, c, i, 1u << 20).variables > 0) {
        t = &c;
        sample = i;
      }
  REQUIRE(t);
  VerifyResult v = exhaustive_verify_renamings(b, toy.vocab, *t, sample, 0);
  CHECK(v.status == VerifyStatus::UnverifiedBudget);
  CHECK(v.enumerated == 0);
  CHECK(std::string(verify_status_name(v.status)) == "UNVERIFIED-budget");
  VerifyResult full = exhaustive_verify_renamings(b, toy.vocab, *t, sample, 1u << 20);
  CHECK(full.status == VerifyStatus::Verified);
}

// ---------------------------------------------------------------------------
// Reports and persistence

TEST_CASE("an always-abstaining model is robust and never accurate") {
  auto toy = make_toy(4, 120);
  ModelBundle b = random_bundle(toy.vocab, 6, 1.0);
  RobustnessReport r = evaluate_robustness(toy.targets, bundle_predictor(b, toy.vocab), toy_attack(toy.vocab, 3));
  CHECK(r.samples == toy.samples());
  CHECK(r.accuracy == 0.0);
  CHECK(r.robustness == 1.0);
  CHECK(r.abstain == 1.0);
  CHECK(r.all.forall_correct + r.all.exists_incorrect + r.all.abstain == doctest::Approx(1.0));
  CHECK(r.on_abstained.samples == r.samples);

  std::ostringstream table, records;
  write_report_table(table, {{"abstainer", r}});
  write_report_records(records, {{"abstainer", r}});
  CHECK(table.str().find("abstainer") != std::string::npos);
  CHECK(table.str().find("100.00%") != std::string::npos);
  auto j = nlohmann::json::parse(records.str());
  CHECK(j["model"] == "abstainer");
  CHECK(j["samples"] == toy.samples());
  CHECK(j["robustness"] == 1.0);
  CHECK(j["all"]["abstain"] == 1.0);
}

TEST_CASE("pipeline output round trip") {
  auto toy = make_toy(4, 130);
  PipelineResult r;
  r.models.push_back(random_bundle(toy.vocab, 1, 0.4));
  r.models.push_back(random_bundle(toy.vocab, 2, 0.0));
  r.models[0].alpha = Abstraction{};
  r.rounds.resize(2);
  const auto dir = std::filesystem::temp_directory_path() / "rct_pipeline_roundtrip";
  std::filesystem::remove_all(dir);
  save_pipeline(dir, r, toy.vocab);

  Manifest m = load_manifest(dir);
  CHECK(m.bundles.size() == 2);
  Vocabulary v;
  auto stack = load_stack(m, &v);
  CHECK(v == toy.vocab);
  REQUIRE(stack.size() == 2);
  CHECK(stack[0].h == r.models[0].h);
  CHECK(stack[0].alpha == r.models[0].alpha);
  for (const auto& t : toy.targets) {
    auto a = predict_stack(r.models, toy.vocab, *t.program, {}, t.positions);
    auto b = predict_stack(stack, v, *t.program, {}, t.positions);
    CHECK(a.labels == b.labels);
    CHECK(a.claimed == b.claimed);
  }

  std::ofstream(dir / "manifest.txt", std::ios::app) << "mystery line\n";
  CHECK_THROWS_AS(load_manifest(dir), DataError);
  std::filesystem::remove_all(dir);
}
