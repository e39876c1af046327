#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "acx/config.hpp"

using namespace acx;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("acx_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

RunOptions in(const std::string& dir) {
  RunOptions o;
  o.out_dir = dir;
  return o;
}

const char* kSplit = R"({
  "kind": "split-check",
  "structures": [{"kind": "twisted", "lambda": 0.2, "expect_torsion": "nonzero"}],
  "fields": 12
})";

// a singular pairing that cannot converge at depth 2
const char* kShallow = R"({
  "kind": "pl-experiment",
  "structure": {"kind": "standard", "n": 2},
  "map": {"kind": "w"},
  "eps_grid": [0.02, 0.01, 0.005, 0.0025],
  "test_forms": [{"support": {"half": 0.3}, "terms": [{"dx": [0, 1]}]}],
  "quadrature": {"max_depth": 2, "abs_tol": 1e-12, "rel_tol": 1e-12}
})";

int shell(const std::string& cmd) {
  int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("git blob hash") {
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("schema errors exit 1 with a diagnostic") {
  auto d = scratch("schema");
  auto r = run_config_text("{\"kind\": \"split-check\",", "bad", in(d));
  CHECK(r.exit_code == 1);
  CHECK(r.message.find("malformed JSON") != std::string::npos);

  r = run_config_text(R"({"kind": "split-check", "structures": [{"kind": "standard"}], "feilds": 3})", "bad", in(d));
  CHECK(r.exit_code == 1);
  CHECK(r.message.find("'feilds'") != std::string::npos);

  r = run_config_text(R"({"kind": "mystery"})", "bad", in(d));
  CHECK(r.exit_code == 1);

  r = run_config_text(R"({"kind": "split-check", "structures": [{"kind": "twisted", "lambda": "big"}]})", "bad", in(d));
  CHECK(r.exit_code == 1);
  CHECK(r.message.find("lambda") != std::string::npos);

  // a test form reaching beyond the twisted validity box
  r = run_config_text(R"({"kind": "pl-experiment", "structure": {"kind": "twisted", "lambda": 0.1},
    "map": {"kind": "w"}, "test_forms": [{"support": {"half": 0.9}, "terms": [{"dx": [0, 1]}]}]})",
                      "bad", in(d));
  CHECK(r.exit_code == 1);
  CHECK(r.message.find("validity box") != std::string::npos);

  auto o = in(d);
  o.expected_kind = "lelong";
  CHECK(run_config_text(kSplit, "split", o).exit_code == 1);
  CHECK(fs::is_empty(d));
}

TEST_CASE("reports carry provenance") {
  auto d = scratch("prov");
  auto r = run_config_text(kSplit, "split", in(d));
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.files.size() == 2);
  auto csv = slurp(d + "/split.csv");
  CHECK(csv.find("# config_hash: \"" + git_blob_hash(kSplit) + "\"") != std::string::npos);
  CHECK(csv.find("# seed: 1") != std::string::npos);
  CHECK(csv.find("structure,field,degree,p,reconstruction_residual") != std::string::npos);
  auto js = slurp(d + "/split.json");
  CHECK(js.find("\"engine\": \"exact\"") != std::string::npos);
  CHECK(js.find("\"abs_tol\"") != std::string::npos);
  CHECK(!fs::exists(d + "/split.csv.tmp"));

  auto o = in(d);
  o.seed = 99;
  o.engine = "fd";
  run_config_text(kSplit, "split", o);
  csv = slurp(d + "/split.csv");
  CHECK(csv.find("# seed: 99") != std::string::npos);
  CHECK(csv.find("# engine: \"fd\"") != std::string::npos);
}

TEST_CASE("check experiments exit 3 on a violated invariant") {
  auto d = scratch("violation");
  auto r = run_config_text(
      R"({"kind": "split-check", "structures": [{"kind": "twisted", "lambda": 0.2, "expect_torsion": "zero"}], "fields": 12})",
      "torsion", in(d));
  CHECK(r.exit_code == 3);
  CHECK(fs::exists(d + "/torsion.csv"));
}

TEST_CASE("non-convergence exits 2 with a partial report") {
  auto d = scratch("shallow");
  auto r = run_config_text(kShallow, "shallow", in(d));
  CHECK(r.exit_code == 2);
  auto csv = slurp(d + "/shallow.csv");
  CHECK(csv.find("NonConvergence") != std::string::npos);
  CHECK(csv.find("epsilon,raw_pairing_re,raw_pairing_im,quad_error") != std::string::npos);
}

TEST_CASE("reruns are byte-identical across thread counts") {
  auto d = scratch("threads");
  const char* cfg = R"({"kind": "pl-experiment", "mode": "model-constant", "p_values": [2],
    "quadrature": {"order": 8, "abs_tol": 1e-9, "rel_tol": 1e-8}})";
  std::string first;
  for (int t : {1, 4, 8}) {
    auto o = in(d);
    o.threads = t;
    REQUIRE(run_config_text(cfg, "mc", o).exit_code == 0);
    auto csv = slurp(d + "/mc.csv");
    if (first.empty())
      first = csv;
    else
      CHECK(csv == first);
  }
}

TEST_CASE("bundled configs") {
  auto all = list_configs(ACX_CONFIG_DIR);
  CHECK(all.size() >= 8);
  bool integrable = false;
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(!all[i].description.empty());
    if (i) CHECK(all[i - 1].file < all[i].file);
    integrable = integrable || all[i].file == "pl_integrable.json";
  }
  CHECK(integrable);
  // every experiment kind has a bundled example
  for (auto& k : experiment_kinds()) CHECK(!list_configs(ACX_CONFIG_DIR, k).empty());
  auto lel = list_configs(ACX_CONFIG_DIR, "lelong");
  CHECK(lel.size() < all.size());
  for (auto& e : lel) CHECK(e.kind == "lelong");
  CHECK(list_configs(ACX_CONFIG_DIR, "no-such-kind").empty());
}

TEST_CASE("command line") {
  const char* cli = std::getenv("ACX_CLI");
  if (!cli) {
    MESSAGE("ACX_CLI not set; skipping the binary checks");
    return;
  }
  std::string exe = cli, d = scratch("binary");
  CHECK(shell(exe + " list") == 0);
  CHECK(shell(exe + " list --kind no-such-kind") == 0);
  CHECK(shell(exe) == 1);
  CHECK(shell(exe + " split-check") == 1);
  CHECK(shell(exe + " split-check --config " + d + "/missing.json") == 1);
  CHECK(shell(exe + " split-check --engine bogus --config x.json") == 1);

  std::ofstream(d + "/split.json") << kSplit;
  CHECK(shell(exe + " split-check --config " + d + "/split.json --out " + d + " --threads 2 --seed 4") == 0);
  CHECK(fs::exists(d + "/split.csv"));
  CHECK(shell(exe + " lelong --config " + d + "/split.json --out " + d) == 1);
  std::ofstream(d + "/shallow.json") << kShallow;
  CHECK(shell(exe + " pl-experiment --config " + d + "/shallow.json --out " + d) == 2);
}
