#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rct/graph.hpp"
#include "rct/minilang.hpp"

namespace rct {

/// One prediction instance: position `position` of program `program`.
struct Sample {
  std::string program;
  NodeId position = kNoNode;
  TypeLabel label = TypeLabel::Unk;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// One sample per labelled node, in node-id order.
std::vector<Sample> extract_samples(const std::string& program_id, const TypeMap& types);

// ---------------------------------------------------------------------------
// Near-duplicate removal

struct SourceFile {
  std::string path;
  std::string text;
};

/// Distinct token 3-grams of a source text (tokens joined by a separator
/// that cannot occur inside a token).
std::vector<std::string> token_trigrams(std::string_view text);
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Processes files in path order and drops a file whose trigram Jaccard
/// similarity with some already retained file exceeds `threshold`, or whose
/// token sequence equals a retained one. Returns retained paths, sorted.
std::vector<std::string> dedup(std::vector<SourceFile> files, double threshold = 0.7);

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
  void validate() const;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
};

/// Program-level partition. Counts use largest remainders; membership is a
/// seeded shuffle of the sorted ids.
Split split_programs(std::vector<std::string> ids, const SplitRatios& ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization

struct Dataset {
  std::string split;
  std::vector<Sample> samples;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_dataset(const Dataset& d, std::ostream& out);
Dataset load_dataset(std::istream& in);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Corpus on disk: `<name>.ml0` source plus a `<name>.labels` sidecar holding
// `nodeid TAB label` for every parameter node.

struct CorpusProgram {
  std::string id;
  Program program;
  ParamEnv params;
  TypeMap types;
};

void write_program(const std::filesystem::path& ml0, const Program& p, const ParamEnv& params);
/// Parses, reads the sidecar and runs the type oracle. Throws DataError.
CorpusProgram load_program(const std::filesystem::path& ml0, const std::string& id);

/// Writes `count` generated programs named `prog_NNNNN.ml0`. Program i uses
/// seed `seed * 1000003 + i`.
void write_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed, const GeneratorConfig& cfg);

struct BuildOptions {
  SplitRatios ratios;
  std::uint64_t seed = 0;
  double dedup_threshold = 0.7;
  int min_tokens = 20;
  int max_tokens = 600;
};

struct BuildReport {
  Split split;
  std::size_t total = 0;
  std::size_t size_filtered = 0;
  std::size_t duplicates = 0;
};

/// Filters, deduplicates and splits a corpus directory, then writes
/// `train.tsv`, `valid.tsv`, `test.tsv` and `manifest.txt` into `out_dir`.
BuildReport build_dataset(const std::filesystem::path& corpus_dir, const std::filesystem::path& out_dir,
                          const BuildOptions& opts);

/// Dataset directory as written by `build_dataset`.
struct DatasetBundle {
  std::filesystem::path corpus_dir;
  std::map<std::string, CorpusProgram> programs;
  Dataset train, valid, test;

  const CorpusProgram& program(const std::string& id) const;
};
DatasetBundle load_dataset_dir(const std::filesystem::path& dir);

}  // namespace rct
