#include <fmt/format.h>

#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "rct/pipeline.hpp"

namespace rct {

namespace {

std::string pct(double x) { return fmt::format("{:6.2f}%", 100.0 * x); }

nlohmann::json breakdown_json(const RobustnessBreakdown& b) {
  return {{"samples", b.samples},
          {"forall_correct", b.forall_correct},
          {"exists_incorrect", b.exists_incorrect},
          {"abstain", b.abstain}};
}

}  // namespace

void write_report_table(std::ostream& out, const std::vector<ReportRow>& rows) {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  out << fmt::format("{:<{}}  {:>8}  {:>10}  {:>8}  {:>7}\n", "model", w, "accuracy", "robustness", "abstain",
                     "samples");
  for (const auto& r : rows)
    out << fmt::format("{:<{}}  {:>8}  {:>10}  {:>8}  {:>7}\n", r.name, w, pct(r.report.accuracy),
                       pct(r.report.robustness), pct(r.report.abstain), r.report.samples);
  out << '\n';
  out << fmt::format("{:<{}}  {:<10}  {:>7}  {:>9}  {:>11}  {:>8}\n", "model", w, "partition", "samples",
                     "forall-ok", "exists-bad", "abstain");
  for (const auto& r : rows) {
    const std::pair<const char*, const RobustnessBreakdown*> parts[] = {{"all", &r.report.all},
                                                                        {"correct", &r.report.on_correct},
                                                                        {"abstained", &r.report.on_abstained},
                                                                        {"incorrect", &r.report.on_incorrect}};
    for (auto [name, b] : parts)
      out << fmt::format("{:<{}}  {:<10}  {:>7}  {:>9}  {:>11}  {:>8}\n", r.name, w, name, b->samples,
                         pct(b->forall_correct), pct(b->exists_incorrect), pct(b->abstain));
  }
}

void write_report_records(std::ostream& out, const std::vector<ReportRow>& rows) {
  for (const auto& r : rows) {
    nlohmann::json j = {{"model", r.name},
                        {"samples", r.report.samples},
                        {"accuracy", r.report.accuracy},
                        {"robustness", r.report.robustness},
                        {"abstain", r.report.abstain},
                        {"counterexamples", r.report.counterexamples.size()},
                        {"explored", r.report.stats.explored},
                        {"rejected", r.report.stats.rejected},
                        {"all", breakdown_json(r.report.all)},
                        {"correct", breakdown_json(r.report.on_correct)},
                        {"abstained", breakdown_json(r.report.on_abstained)},
                        {"incorrect", breakdown_json(r.report.on_incorrect)}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

void save_pipeline(const std::filesystem::path& dir, const PipelineResult& r, const Vocabulary& vocab) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream v(dir / "vocab.txt");
    if (!v) throw std::runtime_error("cannot write " + (dir / "vocab.txt").string());
    vocab.save(v);
  }
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  m << "vocab vocab.txt\n";
  for (std::size_t i = 0; i < r.models.size(); ++i) {
    const std::string name = fmt::format("bundle_{:02}", i);
    r.models[i].save(dir / name);
    m << "bundle " << name << ' ' << name << "/alpha.txt " << fmt::format("{:.17g}", r.models[i].h) << '\n';
  }
  std::ofstream t(dir / "rounds.jsonl");
  for (std::size_t i = 0; i < r.rounds.size(); ++i) {
    const RoundTrace& rt = r.rounds[i];
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& f : rt.refinements)
      refs.push_back({{"alpha", f.alpha_size},
                      {"accepted", f.accepted},
                      {"valid_accuracy", f.valid_accuracy},
                      {"counterexamples", f.counterexamples}});
    t << nlohmann::json{{"round", i},
                        {"t_acc", rt.t_acc},
                        {"train_samples", rt.train_samples},
                        {"claimed", rt.claimed},
                        {"h", rt.h},
                        {"alpha", rt.alpha_size},
                        {"kept", rt.kept},
                        {"refinements", refs}}
             .dump()
      << '\n';
  }
}

Manifest load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw DataError("cannot read " + (dir / "manifest.txt").string());
  Manifest m;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind, path;
    ls >> kind >> path;
    if (kind == "vocab" && !path.empty()) {
      m.vocab = dir / path;
    } else if (kind == "bundle" && !path.empty()) {
      m.bundles.push_back(dir / path);
    } else {
      throw DataError("manifest line " + std::to_string(lineno) + ": unexpected '" + line + "'");
    }
  }
  if (m.vocab.empty()) throw DataError("manifest without vocab line");
  return m;
}

std::vector<ModelBundle> load_stack(const Manifest& m, Vocabulary* vocab) {
  std::ifstream v(m.vocab);
  if (!v) throw DataError("cannot read " + m.vocab.string());
  *vocab = Vocabulary::load(v);
  std::vector<ModelBundle> out;
  for (const auto& dir : m.bundles) {
    out.push_back(ModelBundle::load(dir));
    if (out.back().model->vocab_size != static_cast<int>(vocab->size()))
      throw DataError(dir.string() + ": vocabulary size differs from " + m.vocab.string());
  }
  return out;
}

}  // namespace rct
