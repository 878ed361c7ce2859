#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rct::cli {

/// Entry point of the `rct` tool. `environment` holds `NAME=value` entries
/// (only `RCT_*` ones are consulted). Returns the process exit code:
/// 0 ok, 1 usage error, 2 data error, 3 internal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::vector<std::string>& environment);

/// Removes the outputs a failed command created. Paths that existed before
/// tracking are kept; for directories only entries added afterwards go.
class OutputGuard {
 public:
  void track(const std::filesystem::path& p);
  void commit() { committed_ = true; }
  ~OutputGuard();

 private:
  struct Tracked {
    std::filesystem::path path;
    bool existed = false;
    std::vector<std::filesystem::path> entries;  // of a pre-existing directory
  };
  std::vector<Tracked> tracked_;
  bool committed_ = false;
};

}  // namespace rct::cli
