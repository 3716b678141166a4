#include <CLI11.hpp>

#include <iostream>

#include "bozd/experiment.hpp"

int main(int argc, char** argv) {
  using namespace bozd::cli;
  CLI::App app{"Benjamin-Ono explicit formula and zero-dispersion toolkit"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool check_only = false, quiet = false;

  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "seed for Monte Carlo stages (overrides seed)");
    sub->add_option("--threads", threads, "worker threads (overrides threads)")
        ->check(CLI::Range(1, 256));
    sub->add_flag("--check", check_only, "validate the config and exit");
    sub->add_flag("-q,--quiet", quiet, "no progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();

  auto loaded = load_config(config_path, command);
  for (const auto& d : loaded.diagnostics) std::cerr << d.str() << '\n';
  if (!loaded.ok()) return 2;
  auto cfg = *loaded.config;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (sub->count("--seed")) cfg.seed = seed;
  if (threads > 0) cfg.threads = threads;

  if (check_only) {
    const auto diags = validate(cfg);
    int rc = 0;
    for (const auto& d : diags) {
      std::cerr << d.str() << '\n';
      if (d.severity == Diagnostic::Severity::Error)
        rc = std::max(rc, d.kind == bozd::ErrorKind::RegimeRefusal ? 3 : 2);
    }
    // A validation error outranks a regime refusal.
    for (const auto& d : diags)
      if (d.severity == Diagnostic::Severity::Error && d.kind == bozd::ErrorKind::Validation) rc = 2;
    if (rc == 0) std::cout << "config ok, hash " << config_hash(cfg) << '\n';
    return rc;
  }

  const auto res = run(cfg, quiet ? nullptr : &std::cerr);
  if (res.exit_code != 0) {
    std::cerr << "bo-zdl " << command << " failed (exit " << res.exit_code << "):\n" << res.message;
    if (!res.message.empty() && res.message.back() != '\n') std::cerr << '\n';
    return res.exit_code;
  }
  for (const auto& a : res.artifacts) std::cout << a.string() << '\n';
  return 0;
}
