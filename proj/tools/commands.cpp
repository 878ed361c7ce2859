#include "commands.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "rct/log.hpp"

namespace rct::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------

void OutputGuard::track(const fs::path& p) {
  Tracked t{p, fs::exists(p), {}};
  if (t.existed && fs::is_directory(p))
    for (const auto& e : fs::directory_iterator(p)) t.entries.push_back(e.path());
  tracked_.push_back(std::move(t));
}

OutputGuard::~OutputGuard() {
  if (committed_) return;
  std::error_code ec;
  for (auto it = tracked_.rbegin(); it != tracked_.rend(); ++it) {
    if (!it->existed) {
      fs::remove_all(it->path, ec);
    } else if (fs::is_directory(it->path, ec)) {
      std::vector<fs::path> added;
      for (const auto& e : fs::directory_iterator(it->path, ec))
        if (std::find(it->entries.begin(), it->entries.end(), e.path()) == it->entries.end()) added.push_back(e.path());
      for (const auto& a : added) fs::remove_all(a, ec);
    }
  }
}

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
  bool verbose = false;
  // Flag-level overrides of config keys, applied last.
  std::vector<std::pair<std::string, std::string>> flags;
};

void add_common(CLI::App* c, Common& o) {
  c->add_option("--config", o.config_file, "key=value configuration file")->check(CLI::ExistingFile);
  c->add_option("--set", o.sets, "override one key, KEY=VALUE (repeatable)");
  c->add_option("--seed", o.seed, "root seed");
  c->add_option("--threads", o.threads, "evaluation workers, 0 for all cores");
  c->add_flag("--quiet", o.quiet, "warnings only");
  c->add_flag("--verbose", o.verbose, "debug output");
}

LogLevel parse_level(const std::string& s) {
  if (s == "quiet") return LogLevel::Quiet;
  if (s == "warn") return LogLevel::Warn;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  throw UsageError("log_level must be quiet, warn, info or debug, got '" + s + "'");
}

Config resolve(const Common& o, const std::vector<std::string>& environment) {
  Config cfg;
  if (!o.config_file.empty()) cfg.load_file(o.config_file);
  cfg.apply_env(environment);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects KEY=VALUE, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1), "--set");
  }
  if (o.seed) cfg.set("seed", std::to_string(*o.seed), "--seed");
  if (o.threads) cfg.set("threads", std::to_string(*o.threads), "--threads");
  for (const auto& [k, v] : o.flags) cfg.set(k, v, "--" + k);
  LogLevel level = parse_level(cfg.text("log_level"));
  if (o.quiet) level = LogLevel::Warn;
  if (o.verbose) level = LogLevel::Debug;
  set_log_level(level);
  if (cfg.integer("threads") < 0) throw UsageError("threads must be >= 0");
  std::ostringstream dump;
  cfg.dump(dump);
  std::istringstream lines(dump.str());
  for (std::string line; std::getline(lines, line);) log_info("config " + line);
  return cfg;
}

void write_config(const fs::path& dir, const Config& cfg) {
  std::ofstream out(dir / "config.txt");
  if (!out) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
  cfg.dump(out);
}

// --- data and models -------------------------------------------------------

struct Data {
  DatasetBundle bundle;
  std::vector<AttackTarget> train, valid, test;

  std::vector<const Program*> train_programs() const {
    std::vector<const Program*> out;
    for (const auto& t : train) out.push_back(t.program);
    return out;
  }
  const std::vector<AttackTarget>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "valid") return valid;
    if (name == "test") return test;
    throw UsageError("--split must be train, valid or test, got '" + name + "'");
  }
};

std::unique_ptr<Data> load_data(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
  auto d = std::make_unique<Data>();
  d->bundle = load_dataset_dir(dir);
  d->train = make_targets(d->bundle, d->bundle.train);
  d->valid = make_targets(d->bundle, d->bundle.valid);
  d->test = make_targets(d->bundle, d->bundle.test);
  log_info(fmt::format("data: {} train, {} valid, {} test samples", sample_count(d->train), sample_count(d->valid),
                       sample_count(d->test)));
  return d;
}

Vocabulary training_vocab(const Data& d, const Config& cfg) {
  auto programs = d.train_programs();
  if (programs.empty()) throw DataError("training split is empty");
  return Vocabulary::build(programs, static_cast<int>(cfg.integer("vocab_min_count")));
}

struct Models {
  Vocabulary vocab;
  std::vector<ModelBundle> stack;
};

Models load_models(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("model directory " + dir.string() + " does not exist");
  Models m;
  m.stack = load_stack(load_manifest(dir), &m.vocab);
  return m;
}

// Positions left for bundle `k` of the stack, annotated by bundles 0..k-1.
std::vector<AttackTarget> remaining_for(const Models& m, std::size_t k, std::vector<AttackTarget> targets,
                                        bool annotate_truth) {
  if (k >= m.stack.size())
    throw UsageError(fmt::format("--bundle {} out of range, the stack has {} bundles", k, m.stack.size()));
  for (std::size_t i = 0; i < k; ++i) targets = apply_model(m.stack[i], targets, m.vocab, annotate_truth).abstained;
  return targets;
}

void emit_report(const std::string& name, const RobustnessReport& r, std::ostream& out,
                 const std::optional<fs::path>& dir) {
  std::vector<ReportRow> rows{{name, r}};
  write_report_table(out, rows);
  if (!dir) return;
  std::ofstream table(*dir / "report.txt"), records(*dir / "report.jsonl"), log(*dir / "counterexamples.log");
  if (!table || !records || !log) throw std::runtime_error("cannot write report files in " + dir->string());
  write_report_table(table, rows);
  write_report_records(records, rows);
  for (const auto& c : r.counterexamples) log << c.to_line() << '\n';
}

PipelineResult single(ModelBundle b, std::optional<RoundTrace> trace = std::nullopt) {
  PipelineResult r;
  r.models.push_back(std::move(b));
  if (trace) r.rounds.push_back(*trace);
  return r;
}

// --- commands --------------------------------------------------------------

struct Paths {
  std::string data, model, out, corpus, log, replay;
  std::string split = "test";
  std::size_t bundle = 0;
  std::size_t limit = 0;
  bool lp = false;
};

int cmd_gen_corpus(const Config& cfg, const Paths& p, std::ostream& out) {
  OutputGuard guard;
  guard.track(p.out);
  const int count = static_cast<int>(cfg.integer("corpus_programs"));
  if (count <= 0) throw UsageError("corpus_programs must be positive");
  write_corpus(p.out, count, cfg.stream("corpus"), cfg.generator());
  write_config(p.out, cfg);
  guard.commit();
  out << fmt::format("wrote {} programs to {}\n", count, p.out);
  return 0;
}

int cmd_build_dataset(const Config& cfg, const Paths& p, std::ostream& out) {
  if (!fs::is_directory(p.corpus)) throw DataError("corpus directory " + p.corpus + " does not exist");
  OutputGuard guard;
  guard.track(p.out);
  BuildReport r = build_dataset(p.corpus, p.out, cfg.build_options());
  write_config(p.out, cfg);
  guard.commit();
  out << fmt::format("programs {}  size-filtered {}  duplicates {}  train {}  valid {}  test {}\n", r.total,
                     r.size_filtered, r.duplicates, r.split.train.size(), r.split.valid.size(), r.split.test.size());
  return 0;
}

int cmd_train_baseline(const Config& cfg, const Paths& p, std::ostream& out) {
  auto data = load_data(p.data);
  Vocabulary vocab = training_vocab(*data, cfg);
  OutputGuard guard;
  guard.track(p.out);
  fs::create_directories(p.out);
  std::ofstream log(fs::path(p.out) / "train.log");
  ModelBundle b = train_baseline(data->train, data->valid, vocab, cfg.model(), &log);
  save_pipeline(p.out, single(std::move(b)), vocab);
  write_config(p.out, cfg);
  guard.commit();
  out << "baseline written to " << p.out << '\n';
  return 0;
}

int cmd_train_robust(const Config& cfg, const Paths& p, std::ostream& out) {
  auto data = load_data(p.data);
  Vocabulary vocab = training_vocab(*data, cfg);
  PipelineConfig pc = cfg.pipeline(vocab, data->train_programs());
  OutputGuard guard;
  guard.track(p.out);
  fs::create_directories(p.out);
  std::ofstream log(fs::path(p.out) / "train.log");
  pc.log = &log;
  const double t = cfg.real("t_acc");
  RobustTrainResult r = robust_train(data->train, data->valid, vocab, pc, t, pc.model.seed);
  RoundTrace trace;
  trace.t_acc = t;
  trace.train_samples = sample_count(data->train);
  trace.h = r.bundle.h;
  trace.alpha_size = r.bundle.alpha.size();
  trace.refinements = r.refinements;
  trace.kept = true;
  out << fmt::format("h={:.4f}  abstraction {} features  refinements {}\n", r.bundle.h, r.bundle.alpha.size(),
                     r.refinements.size());
  save_pipeline(p.out, single(std::move(r.bundle), trace), vocab);
  write_config(p.out, cfg);
  guard.commit();
  return 0;
}

int cmd_pipeline(const Config& cfg, const Paths& p, std::ostream& out) {
  auto data = load_data(p.data);
  Vocabulary vocab = training_vocab(*data, cfg);
  PipelineConfig pc = cfg.pipeline(vocab, data->train_programs());
  OutputGuard guard;
  guard.track(p.out);
  fs::create_directories(p.out);
  std::ofstream log(fs::path(p.out) / "train.log");
  pc.log = &log;
  PipelineResult r = accurate_and_robust_train(data->train, data->valid, vocab, pc, pc.model.seed);
  save_pipeline(p.out, r, vocab);
  write_config(p.out, cfg);
  for (std::size_t i = 0; i < r.rounds.size(); ++i) {
    const RoundTrace& t = r.rounds[i];
    out << fmt::format("round {}  t_acc {:.2f}  samples {}  claimed {}  h {:.4f}  features {}{}\n", i, t.t_acc,
                       t.train_samples, t.claimed, t.h, t.alpha_size, t.kept ? "" : "  (dropped)");
  }
  out << fmt::format("{} bundles\n\n", r.models.size());
  AttackConfig ac = cfg.attack(vocab, data->train_programs(), "eval_budget");
  ac.seed = cfg.stream("evaluate");
  RobustnessReport rep = evaluate_robustness(data->test, stack_predictor(r.models, vocab), ac);
  emit_report("pipeline", rep, out, fs::path(p.out));
  guard.commit();
  return 0;
}

int cmd_evaluate(const Config& cfg, const Paths& p, std::ostream& out) {
  auto data = load_data(p.data);
  Models m = load_models(p.model);
  AttackConfig ac = cfg.attack(m.vocab, data->train_programs(), "eval_budget");
  ac.seed = cfg.stream("evaluate");
  std::optional<fs::path> dir;
  OutputGuard guard;
  if (!p.out.empty()) {
    guard.track(p.out);
    fs::create_directories(p.out);
    dir = p.out;
  }
  RobustnessReport rep = evaluate_robustness(data->split(p.split), stack_predictor(m.stack, m.vocab), ac);
  emit_report(fs::path(p.model).filename().string(), rep, out, dir);
  if (dir) write_config(*dir, cfg);
  guard.commit();
  return 0;
}

int cmd_attack(const Config& cfg, const Paths& p, std::ostream& out) {
  auto data = load_data(p.data);
  Models m = load_models(p.model);
  Predictor pred = stack_predictor(m.stack, m.vocab);

  if (!p.replay.empty()) {
    std::map<std::string, const AttackTarget*> by_id;
    for (const auto* split : {&data->train, &data->valid, &data->test})
      for (const auto& t : *split) by_id[t.id] = &t;
    std::ifstream in(p.replay);
    if (!in) throw DataError("cannot read " + p.replay);
    std::size_t total = 0, reproduced = 0;
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (line.empty()) continue;
      Counterexample c;
      try {
        c = Counterexample::from_line(line);
      } catch (const std::exception& e) {
        throw DataError(fmt::format("{}:{}: {}", p.replay, lineno, e.what()));
      }
      auto it = by_id.find(c.program);
      if (it == by_id.end()) throw DataError(fmt::format("{}:{}: unknown program {}", p.replay, lineno, c.program));
      ++total;
      std::string why;
      try {
        const int got = replay(c, *it->second, pred);
        if (got == c.predicted) {
          ++reproduced;
          continue;
        }
        why = fmt::format("predicted {} instead of {}", got, c.predicted);
      } catch (const std::exception& e) {
        why = e.what();
      }
      out << fmt::format("line {}: not reproduced: {}\n", lineno, why);
    }
    out << fmt::format("replayed {} counterexamples, {} reproduced\n", total, reproduced);
    return reproduced == total ? 0 : static_cast<int>(ExitCode::Data);
  }

  if (p.log.empty()) throw UsageError("attack needs --log FILE or --replay FILE");
  AttackConfig ac = cfg.attack(m.vocab, data->train_programs(), "eval_budget");
  ac.seed = cfg.stream("evaluate");
  OutputGuard guard;
  guard.track(p.log);
  RobustnessReport rep = evaluate_robustness(data->split(p.split), pred, ac);
  std::ofstream log(p.log);
  if (!log) throw std::runtime_error("cannot write " + p.log);
  for (const auto& c : rep.counterexamples) log << c.to_line() << '\n';
  log.close();
  guard.commit();
  out << fmt::format("samples {}  robustness {:.4f}  counterexamples {}  explored {}\n", rep.samples,
                     rep.robustness, rep.counterexamples.size(), rep.stats.explored);
  return 0;
}

int cmd_refine(const Config& cfg, const Paths& p, std::ostream& out) {
  auto data = load_data(p.data);
  Models m = load_models(p.model);
  auto targets = remaining_for(m, p.bundle, data->train, true);
  OutputGuard guard;
  guard.track(p.out);
  fs::create_directories(p.out);
  RefineReport rep = refine_representation(targets, m.stack[p.bundle], m.vocab, cfg.refine());
  rep.alpha.save(fs::path(p.out) / "alpha.txt");
  if (p.lp) export_lp(rep.problem, fs::path(p.out) / "problem.lp");
  const FlowSolution& s = rep.solution;
  nlohmann::json j = {{"samples", rep.samples},
                      {"abstained", rep.abstained},
                      {"dropped", rep.problem.dropped.size()},
                      {"features", rep.problem.features.size()},
                      {"kept", rep.alpha.size()},
                      {"objective", s.objective},
                      {"lp_bound", s.lp_bound},
                      {"exact", s.exact},
                      {"note", s.note},
                      {"nodes", s.nodes},
                      {"cuts", s.cuts}};
  std::ofstream(fs::path(p.out) / "refine.json") << j.dump(2) << '\n';
  write_config(p.out, cfg);
  guard.commit();
  out << fmt::format("kept {} of {} features  objective {}  lp bound {:.3f}  {}\n", rep.alpha.size(),
                     rep.problem.features.size(), s.objective, s.lp_bound, s.exact ? "exact" : "rounded");
  return 0;
}

int cmd_verify(const Config& cfg, const Paths& p, std::ostream& out) {
  auto data = load_data(p.data);
  Models m = load_models(p.model);
  auto targets = remaining_for(m, p.bundle, data->split(p.split), false);
  const long long cap = cfg.integer("verify_max_enumerations");
  if (cap < 0) throw UsageError("verify_max_enumerations must be >= 0");
  const ModelBundle& b = m.stack[p.bundle];

  std::ostringstream body;
  body << "# single-variable renamings only; bundle " << p.bundle << '\n';
  body << "program\tposition\tlabel\tstatus\tcone\tvariables\tnames\tenumerated\n";
  std::map<VerifyStatus, std::size_t> counts;
  std::size_t done = 0;
  for (const auto& t : targets) {
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
      if (p.limit && done >= p.limit) break;
      ++done;
      VerifyResult v = exhaustive_verify_renamings(b, m.vocab, t, i, static_cast<std::size_t>(cap));
      ++counts[v.status];
      body << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", t.id, t.positions[i],
                          label_name(label_from_index(t.labels[i])), verify_status_name(v.status), v.cone_nodes,
                          v.variables, v.names, v.enumerated);
      if (v.counterexample) body << "counterexample\t" << v.counterexample->to_line() << '\n';
    }
  }
  const std::string summary =
      fmt::format("verified {}  counterexample {}  unverified-budget {}  of {} samples\n",
                  counts[VerifyStatus::Verified], counts[VerifyStatus::Counterexample],
                  counts[VerifyStatus::UnverifiedBudget], done);
  if (!p.out.empty()) {
    OutputGuard guard;
    guard.track(p.out);
    std::ofstream f(p.out);
    if (!f) throw std::runtime_error("cannot write " + p.out);
    f << body.str();
    f.close();
    guard.commit();
  } else {
    out << body.str();
  }
  out << summary;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::vector<std::string>& environment) {
  CLI::App app{"Robust type prediction with abstention and representation refinement", "rct"};
  app.require_subcommand(1);
  Common common;
  Paths paths;
  using Fn = int (*)(const Config&, const Paths&, std::ostream&);
  std::vector<std::pair<CLI::App*, Fn>> commands;
  std::optional<int> count;
  std::optional<double> t_acc;
  std::optional<int> budget;

  auto sub = [&](const char* name, const char* help, Fn fn) {
    CLI::App* c = app.add_subcommand(name, help);
    add_common(c, common);
    commands.emplace_back(c, fn);
    return c;
  };
  auto* gen = sub("gen-corpus", "write generated programs", cmd_gen_corpus);
  gen->add_option("--out", paths.out, "corpus directory")->required();
  gen->add_option("--count", count, "programs to write (corpus_programs)");

  auto* build = sub("build-dataset", "filter, deduplicate and split a corpus", cmd_build_dataset);
  build->add_option("--corpus", paths.corpus, "corpus directory")->required();
  build->add_option("--out", paths.out, "dataset directory")->required();

  auto* base = sub("train-baseline", "cross-entropy model that never abstains", cmd_train_baseline);
  base->add_option("--data", paths.data, "dataset directory")->required();
  base->add_option("--out", paths.out, "model directory")->required();

  auto* robust = sub("train-robust", "one robust model with abstention and refinement", cmd_train_robust);
  robust->add_option("--data", paths.data, "dataset directory")->required();
  robust->add_option("--out", paths.out, "model directory")->required();
  robust->add_option("--t-acc", t_acc, "target accuracy (t_acc)");

  auto* pipe = sub("pipeline", "train the model stack and report on the test split", cmd_pipeline);
  pipe->add_option("--data", paths.data, "dataset directory")->required();
  pipe->add_option("--out", paths.out, "model directory")->required();
  pipe->add_option("--t-acc", t_acc, "target accuracy (t_acc)");

  auto* eval = sub("evaluate", "accuracy, robustness and abstain rates of a model directory", cmd_evaluate);
  eval->add_option("--data", paths.data, "dataset directory")->required();
  eval->add_option("--model", paths.model, "model directory")->required();
  eval->add_option("--split", paths.split, "train, valid or test");
  eval->add_option("--budget", budget, "sequences per sample (eval_budget)");
  eval->add_option("--out", paths.out, "report directory");

  auto* attack = sub("attack", "search counterexamples, or replay a counterexample log", cmd_attack);
  attack->add_option("--data", paths.data, "dataset directory")->required();
  attack->add_option("--model", paths.model, "model directory")->required();
  attack->add_option("--split", paths.split, "train, valid or test");
  attack->add_option("--budget", budget, "sequences per sample (eval_budget)");
  auto* log_opt = attack->add_option("--log", paths.log, "counterexample log to write");
  attack->add_option("--replay", paths.replay, "counterexample log to replay")->excludes(log_opt);

  auto* refine = sub("refine", "solve the refinement problem for one bundle", cmd_refine);
  refine->add_option("--data", paths.data, "dataset directory")->required();
  refine->add_option("--model", paths.model, "model directory")->required();
  refine->add_option("--out", paths.out, "output directory")->required();
  refine->add_option("--bundle", paths.bundle, "bundle index in the stack");
  refine->add_flag("--lp", paths.lp, "also write problem.lp");

  auto* verify = sub("verify", "exhaustive single-rename verification", cmd_verify);
  verify->add_option("--data", paths.data, "dataset directory")->required();
  verify->add_option("--model", paths.model, "model directory")->required();
  verify->add_option("--split", paths.split, "train, valid or test");
  verify->add_option("--bundle", paths.bundle, "bundle index in the stack");
  verify->add_option("--limit", paths.limit, "samples to verify, 0 for all");
  verify->add_option("--out", paths.out, "result file");

  set_log_stream(&err);
  struct ResetLog {
    ~ResetLog() { set_log_stream(&std::cerr); }
  } reset_log;

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  try {
    if (count) common.flags.emplace_back("corpus_programs", std::to_string(*count));
    if (t_acc) common.flags.emplace_back("t_acc", fmt::format("{}", *t_acc));
    if (budget) common.flags.emplace_back("eval_budget", std::to_string(*budget));
    Config cfg = resolve(common, environment);
    for (auto [c, fn] : commands)
      if (c->parsed()) return fn(cfg, paths, out);
    return static_cast<int>(ExitCode::Usage);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Usage);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Data);
  } catch (const SyntaxError& e) {
    err << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Data);
  } catch (const TypeError& e) {
    err << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Data);
  } catch (const ShapeError& e) {
    err << "internal error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Internal);
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Usage);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Internal);
  }
}

}  // namespace rct::cli
