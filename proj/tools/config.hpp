#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rct/pipeline.hpp"

namespace rct::cli {

/// Bad flag, bad config key or bad value: exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExitCode : int { Ok = 0, Usage = 1, Data = 2, Internal = 3 };

/// Flat `key=value` settings. Every key has a default; later sources
/// override earlier ones: defaults, config file, `RCT_<KEY>` environment
/// variables, command-line flags.
class Config {
 public:
  enum class Kind { Int, UInt, Real, Text };

  Config();

  /// Throws UsageError on an unknown key or a value of the wrong kind.
  void set(const std::string& key, const std::string& value, const std::string& source);
  /// `key=value` lines; `#` starts a comment; blank lines ignored.
  void load_file(const std::filesystem::path& path);
  void load_stream(std::istream& in, const std::string& source);
  /// Applies `RCT_<KEY>` (key upper-cased) for every known key. `environ`
  /// style entries `NAME=value`; an `RCT_` entry naming no key is rejected.
  void apply_env(const std::vector<std::string>& environment);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  long long integer(const std::string& key) const;
  std::uint64_t uinteger(const std::string& key) const;
  double real(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  /// Where the current value came from: "default", a file name or an
  /// environment variable.
  const std::string& source(const std::string& key) const;

  /// All keys in order, `key=value  # source`.
  void dump(std::ostream& out) const;
  std::vector<std::string> keys() const;

  // Module settings derived from the keys.
  GeneratorConfig generator() const;
  BuildOptions build_options() const;
  ModelConfig model() const;
  RefineOptions refine() const;
  /// Attack settings with the rename pool from `vocab` and string
  /// constants from `programs`; `budget_key` selects the budget.
  AttackConfig attack(const Vocabulary& vocab, const std::vector<const Program*>& programs,
                      const std::string& budget_key) const;
  PipelineConfig pipeline(const Vocabulary& vocab, const std::vector<const Program*>& programs) const;

  /// Seed of a named sub-stream of the root seed.
  std::uint64_t stream(const std::string& name) const;

 private:
  struct Entry {
    Kind kind;
    std::string value;
    std::string source;
    std::string doc;
  };
  void define(const std::string& key, Kind kind, std::string value, std::string doc);
  const Entry& at(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

/// Environment variable for a key: `RCT_` + upper case.
std::string env_name(const std::string& key);

/// String literal values of `programs` plus a few fixed ones, sorted.
std::vector<std::string> string_pool(const std::vector<const Program*>& programs);

}  // namespace rct::cli
