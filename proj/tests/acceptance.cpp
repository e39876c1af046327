// Acceptance suite: runs the bundled configs through the command line tool and
// prints one PASS/FAIL line per criterion.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = ACX_CLI_PATH;
const std::string kConfigs = ACX_CONFIG_DIR;
const fs::path kOut = fs::temp_directory_path() / "acx_acceptance";

struct Run {
  int rc = -1;
  double seconds = 0;
  json report;
  std::string csv;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Run run(const std::string& sub, const std::string& config, int threads = 1, const std::string& tag = "t1") {
  fs::path dir = kOut / tag;
  fs::create_directories(dir);
  std::string cmd = kCli + " " + sub + " --config " + kConfigs + "/" + config + ".json --out " + dir.string() +
                    " --threads " + std::to_string(threads) + " >/dev/null 2>" + (dir / (config + ".err")).string();
  auto t0 = std::chrono::steady_clock::now();
  int st = std::system(cmd.c_str());
  Run r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.rc = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  if (fs::exists(dir / (config + ".json"))) r.report = json::parse(slurp(dir / (config + ".json")));
  r.csv = slurp(dir / (config + ".csv"));
  return r;
}

// CSV body as rows of cells, comment lines skipped; first row is the header
std::vector<std::map<std::string, std::string>> table(const std::string& csv) {
  std::vector<std::map<std::string, std::string>> out;
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> head;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (head.empty()) {
      head = cells;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < head.size() && i < cells.size(); ++i) row[head[i]] = cells[i];
    out.push_back(row);
  }
  return out;
}

double cell(const std::map<std::string, std::string>& row, const std::string& key) {
  auto it = row.find(key);
  return it == row.end() || it->second.empty() ? NAN : std::strtod(it->second.c_str(), nullptr);
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

int failures = 0;
// ctest hides the output of passing tests; the lines are kept here as well
std::FILE* log_file = nullptr;

void report(const std::string& id, bool ok, const std::string& what, double seconds, double budget) {
  bool in_time = seconds <= budget;
  bool pass = ok && in_time;
  if (!pass) ++failures;
  for (std::FILE* f : {stdout, log_file}) {
    if (!f) continue;
    std::fprintf(f, "%s %s %s (%.1f s of %.0f s)%s\n", id.c_str(), pass ? "PASS" : "FAIL", what.c_str(), seconds,
                 budget, in_time ? "" : " over budget");
    std::fflush(f);
  }
}

std::map<std::string, std::string> baseline;  // config -> CSV at one thread

Run tracked(const std::string& sub, const std::string& config) {
  Run r = run(sub, config);
  baseline[config] = r.csv;
  return r;
}

void ac1() {
  auto r = tracked("pl-experiment", "model_constant");
  bool ok = r.rc == 0;
  std::string what = "model constant:";
  for (auto& row : r.report["summary"]["rows"]) {
    double rel = row["rel_err"];
    ok = ok && rel <= 1e-6;
    what += " p=" + std::to_string(row["p"].get<int>()) + " rel " + fmt(rel);
  }
  ok = ok && r.report["summary"]["rows"].size() == 2;
  report("AC1", ok, what, r.seconds, 60);
}

void ac2() {
  auto r = tracked("pl-experiment", "ma_identity");
  bool ok = r.rc == 0;
  double worst = 0;
  std::map<std::string, int> points;
  for (auto& row : table(r.csv)) {
    worst = std::max(worst, cell(row, "max_abs_diff"));
    points[row["structure"] + "/" + row["epsilon"]]++;
  }
  for (auto& [k, n] : points) ok = ok && n == 200;
  ok = ok && points.size() == 6 && worst <= 1e-8;
  report("AC2", ok, "w1 - w2 identity: " + std::to_string(points.size()) + " (structure, eps) sets of 200 points, max diff " + fmt(worst),
         r.seconds, 120);
}

void ac3() {
  auto r = tracked("pl-experiment", "pl_integrable");
  bool ok = r.rc == 0;
  double worst_rel = 0, worst_rem = 0;
  int forms = 0;
  for (auto& row : r.report["summary"]["rows"]) {
    ++forms;
    double z = std::hypot(row["Z_pairing"][0].get<double>(), row["Z_pairing"][1].get<double>());
    double lr = row["limit"][0], li = row["limit"][1];
    double rem = std::hypot(row["remainder"][0].get<double>(), row["remainder"][1].get<double>());
    worst_rem = std::max(worst_rem, rem);
    if (z > 0) worst_rel = std::max(worst_rel, std::hypot(lr - row["Z_pairing"][0].get<double>(), li - row["Z_pairing"][1].get<double>()) / z);
    ok = ok && row["stable"].get<bool>();
  }
  ok = ok && forms == 5 && worst_rel <= 1e-3 && worst_rem <= 1e-3;
  report("AC3", ok,
         "integrable limit: " + std::to_string(forms) + " forms, max rel dev from [Z] " + fmt(worst_rel) +
             ", max |remainder| " + fmt(worst_rem),
         r.seconds, 600);
}

void ac4() {
  auto r = tracked("pl-experiment", "pl_twisted");
  bool ok = r.rc == 0;
  for (auto& row : r.report["summary"]["rows"]) {
    ok = ok && row.contains("stable") && row["stable"].get<bool>();
    ok = ok && std::isfinite(row["remainder"][0].get<double>()) && std::isfinite(row["remainder"][1].get<double>());
  }
  std::string what = "twisted limit: stable and finite; remainder slopes";
  auto& slopes = r.report["summary"]["remainder_slopes"];
  ok = ok && !slopes.empty();
  for (auto it = slopes.begin(); it != slopes.end(); ++it) {
    ok = ok && it.value().get<double>() >= 1.0;
    what += " " + it.key() + " " + fmt(it.value().get<double>());
  }
  report("AC4", ok, what, r.seconds, 1200);
}

void ac5() {
  auto r = tracked("split-check", "split_check");
  bool ok = r.rc == 0;
  std::string what = "operator splitting:";
  for (auto& s : r.report["summary"]["structures"]) {
    ok = ok && s["pass"].get<bool>();
    what += " " + s["structure"].get<std::string>() + " rec " + fmt(s["max_reconstruction_residual"]) + " torsion " +
            fmt(s["max_torsion"]) + ";";
  }
  ok = ok && table(r.csv).size() == 300;
  report("AC5", ok, what, r.seconds, 60);
}

void ac6() {
  auto r = tracked("lelong", "lelong_models");
  bool ok = r.rc == 0;
  std::string what = "Lelong numbers:";
  for (auto& c : r.report["summary"]["cases"]) {
    ok = ok && c["pass"].get<bool>() && c["c"].get<double>() >= 0;
    what += " " + c["name"].get<std::string>() + " " + fmt(c["nu0"]) + " (c " + fmt(c["c"]) + ")";
  }
  report("AC6", ok, what, r.seconds, 600);
}

void ac7() {
  auto r = tracked("lelong", "lelong_psh");
  bool ok = r.rc == 0;
  std::string what = "corrected density:";
  for (auto& c : r.report["summary"]["cases"]) {
    ok = ok && c["pass"].get<bool>() && c["has_delta"].get<bool>();
    what += " " + c["name"].get<std::string>() + " nu0 " + fmt(c["nu0"]) + " delta " + fmt(c["delta"]);
  }
  // g tends to 0 along the decreasing radii
  std::map<std::string, std::vector<std::pair<double, double>>> g;
  for (auto& row : table(r.csv)) g[row["case"]].push_back({cell(row, "g"), cell(row, "g_err")});
  for (auto& [name, v] : g) {
    auto [last, err] = v.back();
    bool small = std::abs(last) <= std::max(1e-2 * std::abs(v.front().first), 10 * err);
    ok = ok && small;
    what += "; " + name + " |g(r_min)| " + fmt(std::abs(last));
  }
  ok = ok && g.size() == 2;
  report("AC7", ok, what, r.seconds, 600);
}

void ac8() {
  auto a = tracked("coord-invariance", "coord_invariance_std");
  auto b = tracked("coord-invariance", "coord_invariance_twisted");
  bool ok = a.rc == 0 && b.rc == 0;
  double da = a.report["summary"]["diff"], db = b.report["summary"]["diff"];
  ok = ok && da <= 2e-2 && db <= 2e-2;
  report("AC8", ok, "chart independence: standard diff " + fmt(da) + ", twisted diff " + fmt(db), a.seconds + b.seconds,
         600);
}

void ac9() {
  auto a = tracked("restriction", "restriction_std");
  auto b = tracked("restriction", "restriction_twisted");
  bool ok = a.rc == 0 && b.rc == 0;
  std::string what = "restriction:";
  for (auto* r : {&a, &b}) {
    ok = ok && table(r->csv).size() == 5;
    double dev = r->report["summary"]["max_dev"];
    ok = ok && dev <= 0.05;
    what += " " + r->report["summary"]["structure"].get<std::string>() + " m_A " + fmt(r->report["summary"]["m_A"]) +
            " max dev " + fmt(dev) + ";";
  }
  report("AC9", ok, what, a.seconds + b.seconds, 900);
}

void ac10() {
  auto e = tracked("validate", "validate_exp_graph");
  auto l = tracked("validate", "validate_line");
  bool ok = e.rc == 0 && l.rc == 0;
  std::string what = "area probe: exp graph growth";
  int levels = 0;
  for (auto& row : table(e.csv)) {
    if (row["chart"] != "graph" || row["growth"].empty()) continue;
    ++levels;
    ok = ok && cell(row, "growth") > 2.0;
    what += " " + fmt(cell(row, "growth"));
  }
  ok = ok && levels == 3;
  bool stable = true;
  for (auto& row : table(l.csv))
    if (!row["growth"].empty()) stable = stable && std::abs(cell(row, "growth") - 1) <= 1e-6;
  ok = ok && stable && l.report["summary"]["pass"].get<bool>() && !e.report["summary"]["pass"].get<bool>();
  what += std::string("; line ") + (stable ? "stable" : "unstable");
  report("AC10", ok, what, e.seconds + l.seconds, 300);
}

// configs cheap enough to rerun twice more on a single core
void ac11() {
  const std::vector<std::pair<std::string, std::string>> cfgs = {
      {"pl-experiment", "model_constant"}, {"pl-experiment", "ma_identity"}, {"split-check", "split_check"},
      {"lelong", "lelong_models"},         {"validate", "validate_line"},     {"validate", "validate_exp_graph"},
      {"pl-experiment", "pl_integrable"}};
  bool ok = true;
  double secs = 0;
  int compared = 0;
  for (auto& [sub, c] : cfgs) {
    if (!baseline.count(c) || baseline[c].empty()) {
      ok = false;
      continue;
    }
    for (int t : {4, 8}) {
      auto r = run(sub, c, t, "t" + std::to_string(t));
      secs += r.seconds;
      ok = ok && r.rc == 0 && r.csv == baseline[c];
      ++compared;
    }
  }
  report("AC11", ok, "reruns at 4 and 8 threads byte-identical to 1 thread for " + std::to_string(cfgs.size()) +
                         " configs (" + std::to_string(compared) + " comparisons)",
         secs, 1800);
}

}  // namespace

int main() {
  fs::remove_all(kOut);
  log_file = std::fopen("acceptance_report.txt", "w");
  const std::vector<std::function<void()>> all = {ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10, ac11};
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      all[i]();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("AC%zu FAIL report unreadable: %s\n", i + 1, e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  if (log_file) {
    std::fprintf(log_file, "%d criteria failed\n", failures);
    std::fclose(log_file);
  }
  return failures == 0 ? 0 : 1;
}
