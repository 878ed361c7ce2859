#include "rct/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace rct {

namespace fs = std::filesystem;

std::vector<Sample> extract_samples(const std::string& program_id, const TypeMap& types) {
  std::vector<Sample> out;
  out.reserve(types.size());
  for (const auto& [id, label] : types) out.push_back({program_id, id, label});
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> token_texts(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text))
    if (t.kind != TokenKind::End) out.push_back(t.kind == TokenKind::String ? "\"" + t.text + "\"" : t.text);
  return out;
}

}  // namespace

std::vector<std::string> token_trigrams(std::string_view text) {
  auto toks = token_texts(text);
  std::set<std::string> grams;
  for (std::size_t i = 0; i + 2 < toks.size(); ++i) grams.insert(toks[i] + '\x1f' + toks[i + 1] + '\x1f' + toks[i + 2]);
  return {grams.begin(), grams.end()};
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::string> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  double uni = static_cast<double>(a.size() + b.size() - inter.size());
  return static_cast<double>(inter.size()) / uni;
}

std::vector<std::string> dedup(std::vector<SourceFile> files, double threshold) {
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  struct Kept {
    std::vector<std::string> tokens;
    std::vector<std::string> grams;
  };
  std::vector<Kept> kept;
  std::vector<std::string> out;
  for (const auto& f : files) {
    Kept k{token_texts(f.text), token_trigrams(f.text)};
    bool drop = std::any_of(kept.begin(), kept.end(), [&](const Kept& r) {
      return r.tokens == k.tokens || jaccard(r.grams, k.grams) > threshold;
    });
    if (drop) continue;
    out.push_back(f.path);
    kept.push_back(std::move(k));
  }
  return out;
}

// ---------------------------------------------------------------------------

void SplitRatios::validate() const {
  if (train < 0 || valid < 0 || test < 0) throw std::invalid_argument("split ratios must be non-negative");
  if (std::abs(train + valid + test - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
}

Split split_programs(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const double n = static_cast<double>(ids.size());
  std::array<double, 3> exact = {ratios.train * n, ratios.valid * n, ratios.test * n};
  std::array<std::size_t, 3> count{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    count[i] = static_cast<std::size_t>(std::floor(exact[i] + 1e-9));
    assigned += count[i];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return exact[a] - std::floor(exact[a] + 1e-9) > exact[b] - std::floor(exact[b] + 1e-9);
  });
  for (int i = 0; assigned < ids.size(); i = (i + 1) % 3) {
    if (exact[order[i]] <= 0) continue;
    ++count[order[i]];
    ++assigned;
  }
  Split s;
  auto it = ids.begin();
  s.train.assign(it, it + static_cast<long>(count[0]));
  it += static_cast<long>(count[0]);
  s.valid.assign(it, it + static_cast<long>(count[1]));
  it += static_cast<long>(count[1]);
  s.test.assign(it, ids.end());
  return s;
}

// ---------------------------------------------------------------------------

namespace {
constexpr const char* kDatasetHeader = "# rct-dataset v1 split=";
}

void save_dataset(const Dataset& d, std::ostream& out) {
  out << kDatasetHeader << d.split << '\n';
  for (const auto& s : d.samples) out << s.program << '\t' << s.position << '\t' << label_name(s.label) << '\n';
}

Dataset load_dataset(std::istream& in) {
  Dataset d;
  std::string line;
  if (!std::getline(in, line) || line.rfind(kDatasetHeader, 0) != 0)
    throw DataError("dataset line 1: missing header");
  d.split = line.substr(std::string_view(kDatasetHeader).size());
  int lineno = 1;
  while (true) {
    if (!std::getline(in, line)) break;
    ++lineno;
    auto fail = [&](const std::string& what) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + what + " (last good line " +
                      std::to_string(lineno - 1) + ")");
    };
    if (in.eof()) fail("truncated record (no trailing newline)");
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) fail("expected 3 tab-separated fields");
    Sample s;
    s.program = line.substr(0, t1);
    std::string pos = line.substr(t1 + 1, t2 - t1 - 1);
    try {
      std::size_t used = 0;
      s.position = std::stoi(pos, &used);
      if (used != pos.size() || s.position < 0) fail("bad node id '" + pos + "'");
    } catch (const std::logic_error&) {
      fail("bad node id '" + pos + "'");
    }
    auto label = label_from_name(line.substr(t2 + 1));
    if (!label) fail("unknown label '" + line.substr(t2 + 1) + "'");
    s.label = *label;
    d.samples.push_back(std::move(s));
  }
  return d;
}

void save_dataset(const Dataset& d, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  save_dataset(d, out);
}

Dataset load_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return load_dataset(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path sidecar(const fs::path& ml0) {
  fs::path s = ml0;
  s.replace_extension(".labels");
  return s;
}

}  // namespace

void write_program(const fs::path& ml0, const Program& p, const ParamEnv& params) {
  std::ofstream src(ml0);
  std::ofstream lab(sidecar(ml0));
  if (!src || !lab) throw DataError("cannot write " + ml0.string());
  src << print(p) << '\n';
  for (const auto& [id, label] : params) lab << id << '\t' << label_name(label) << '\n';
}

CorpusProgram load_program(const fs::path& ml0, const std::string& id) {
  CorpusProgram cp;
  cp.id = id;
  try {
    cp.program = parse(read_file(ml0));
  } catch (const SyntaxError& e) {
    throw DataError(ml0.string() + ": " + e.what());
  }
  if (fs::exists(sidecar(ml0))) {
    std::istringstream in(read_file(sidecar(ml0)));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::size_t tab = line.find('\t');
      auto label = tab == std::string::npos ? std::nullopt : label_from_name(line.substr(tab + 1));
      NodeId node = kNoNode;
      if (label) {
        try {
          node = std::stoi(line.substr(0, tab));
        } catch (const std::logic_error&) {
        }
      }
      if (!label || node < 0 || static_cast<std::size_t>(node) >= cp.program.size() ||
          cp.program.node(node).kind != NodeKind::Param)
        throw DataError(sidecar(ml0).string() + " line " + std::to_string(lineno) + ": bad parameter label");
      cp.params[node] = *label;
    }
  }
  try {
    cp.types = infer_types(cp.program, BuiltinTable::standard(), cp.params);
  } catch (const TypeError& e) {
    throw DataError(ml0.string() + ": " + e.what());
  }
  return cp;
}

void write_corpus(const fs::path& dir, int count, std::uint64_t seed, const GeneratorConfig& cfg) {
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    auto g = generate_program(seed * 1000003ULL + static_cast<std::uint64_t>(i), cfg);
    char name[32];
    std::snprintf(name, sizeof name, "prog_%05d.ml0", i);
    write_program(dir / name, g.program, g.params);
  }
}

BuildReport build_dataset(const fs::path& corpus_dir, const fs::path& out_dir, const BuildOptions& opts) {
  opts.ratios.validate();
  if (opts.min_tokens > opts.max_tokens) throw std::invalid_argument("min_tokens exceeds max_tokens");
  BuildReport rep;
  std::vector<SourceFile> files;
  for (const auto& e : fs::directory_iterator(corpus_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".ml0") continue;
    ++rep.total;
    SourceFile f{e.path().filename().string(), read_file(e.path())};
    std::size_t ntok;
    try {
      ntok = tokenize(f.text).size() - 1;
    } catch (const SyntaxError& err) {
      throw DataError(e.path().string() + ": " + err.what());
    }
    if (ntok < static_cast<std::size_t>(opts.min_tokens) || ntok > static_cast<std::size_t>(opts.max_tokens)) {
      ++rep.size_filtered;
      continue;
    }
    files.push_back(std::move(f));
  }
  std::size_t before = files.size();
  std::vector<std::string> kept = dedup(std::move(files), opts.dedup_threshold);
  rep.duplicates = before - kept.size();
  rep.split = split_programs(kept, opts.ratios, opts.seed);

  fs::create_directories(out_dir);
  auto write_split = [&](const std::string& name, const std::vector<std::string>& ids) {
    Dataset d;
    d.split = name;
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& id : sorted) {
      CorpusProgram cp = load_program(corpus_dir / id, id);
      auto s = extract_samples(id, cp.types);
      d.samples.insert(d.samples.end(), s.begin(), s.end());
    }
    save_dataset(d, out_dir / (name + ".tsv"));
  };
  write_split("train", rep.split.train);
  write_split("valid", rep.split.valid);
  write_split("test", rep.split.test);

  std::ofstream man(out_dir / "manifest.txt");
  man << "corpus\t" << fs::absolute(corpus_dir).lexically_normal().string() << '\n';
  for (const auto& id : rep.split.train) man << "train\t" << id << '\n';
  for (const auto& id : rep.split.valid) man << "valid\t" << id << '\n';
  for (const auto& id : rep.split.test) man << "test\t" << id << '\n';
  return rep;
}

const CorpusProgram& DatasetBundle::program(const std::string& id) const {
  auto it = programs.find(id);
  if (it == programs.end()) throw DataError("unknown program '" + id + "'");
  return it->second;
}

DatasetBundle load_dataset_dir(const fs::path& dir) {
  DatasetBundle b;
  std::ifstream man(dir / "manifest.txt");
  if (!man) throw DataError("cannot read " + (dir / "manifest.txt").string());
  std::string line;
  std::set<std::string> ids;
  while (std::getline(man, line)) {
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) continue;
    std::string key = line.substr(0, tab), val = line.substr(tab + 1);
    if (key == "corpus") b.corpus_dir = val;
    else ids.insert(val);
  }
  if (b.corpus_dir.empty()) throw DataError("manifest has no corpus line");
  for (const auto& id : ids) b.programs.emplace(id, load_program(b.corpus_dir / id, id));
  b.train = load_dataset(dir / "train.tsv");
  b.valid = load_dataset(dir / "valid.tsv");
  b.test = load_dataset(dir / "test.tsv");
  for (const Dataset* d : {&b.train, &b.valid, &b.test})
    for (const auto& s : d->samples) {
      const CorpusProgram& cp = b.program(s.program);
      if (static_cast<std::size_t>(s.position) >= cp.program.size())
        throw DataError("sample position " + std::to_string(s.position) + " outside " + s.program);
    }
  return b;
}

}  // namespace rct
