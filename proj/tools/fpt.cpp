#include <iostream>

#include <CLI11.hpp>

#include "fpt/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"First-passage densities through moving boundaries"};
  app.require_subcommand(1);
  fpt::CommandOptions options;
  std::uint64_t seed = 0;

  for (const char* name : {"solve", "simulate", "validate", "compare"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--scenario", options.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", options.out, "output directory (default: the scenario's output field)");
    sub->add_option("--seed", seed, "Monte Carlo seed, overrides montecarlo.seed");
    sub->add_option("--threads", options.threads, "worker threads (default: $FPT_THREADS, else 1)")
        ->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? fpt::kExitOk : fpt::kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) options.seed = seed;
  return fpt::run_command(chosen->get_name(), options, std::cerr);
}
