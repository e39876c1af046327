#pragma once

// JSON experiment configs: parsing, dispatch, CSV/JSON reports with provenance.
//
// exit codes: 0 ok, 1 config or usage error, 2 numerical failure
// (non-convergence, unstable extrapolation), 3 a check experiment found a violation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace acx {

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<std::string> engine;  // "exact" | "fd"
  std::string expected_kind;          // subcommand name; empty accepts any kind
};

struct RunResult {
  int exit_code = 0;
  std::string message;
  std::vector<std::string> files;
};

RunResult run_config_file(const std::string& path, const RunOptions& opt);
// stem names the output files (<stem>.csv, <stem>.json)
RunResult run_config_text(const std::string& text, const std::string& stem, const RunOptions& opt);

struct ConfigEntry {
  std::string file, kind, description;
};
// bundled configs sorted by file name; kind filter is exact
std::vector<ConfigEntry> list_configs(const std::string& dir, const std::string& kind = "");

const std::vector<std::string>& experiment_kinds();

// SHA-1 of "blob <size>\0<content>", as git hashes file contents
std::string git_blob_hash(const std::string& content);

// write via a temporary file and rename
void write_atomic(const std::string& path, const std::string& content);

}  // namespace acx
