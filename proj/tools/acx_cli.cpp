#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "acx/config.hpp"

#ifndef ACX_CONFIG_DIR
#define ACX_CONFIG_DIR "configs"
#endif

int main(int argc, char** argv) {
  CLI::App app{"acx: numerical experiments on almost complex manifolds"};
  app.require_subcommand(1);

  acx::RunOptions opt;
  std::string config;
  std::uint64_t seed = 0;
  std::string engine;
  auto* cfg_opt = app.add_option("--config", config, "experiment config (JSON)");
  app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "seed, overrides the config");
  app.add_option("--threads", opt.threads, "quadrature threads")->check(CLI::PositiveNumber)->capture_default_str();
  auto* eng_opt = app.add_option("--engine", engine, "derivative engine")->check(CLI::IsMember({"exact", "fd"}));

  for (const auto& kind : acx::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "run a " + kind + " config");
    sub->fallthrough();
  }
  std::string dir = ACX_CONFIG_DIR, kind_filter;
  auto* list = app.add_subcommand("list", "bundled configs");
  list->add_option("--kind", kind_filter, "only configs of this experiment kind");
  list->add_option("--dir", dir, "config directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (*list) {
    auto entries = acx::list_configs(dir, kind_filter);
    for (auto& e : entries) std::printf("%-32s %-17s %s\n", e.file.c_str(), e.kind.c_str(), e.description.c_str());
    return 0;
  }

  if (!*cfg_opt) {
    std::cerr << "error: --config is required\n";
    return 1;
  }
  if (*seed_opt) opt.seed = seed;
  if (*eng_opt) opt.engine = engine;
  opt.expected_kind = app.get_subcommands().front()->get_name();

  auto res = acx::run_config_file(config, opt);
  for (auto& f : res.files) std::cout << f << "\n";
  if (!res.message.empty()) std::cerr << (res.exit_code == 3 ? "violation: " : "error: ") << res.message << "\n";
  return res.exit_code;
}
