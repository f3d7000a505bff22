// Command-line front end: qtomo <command> --config PATH [--seed U64] [--out DIR] [--threads N]
#include <iostream>

#include <CLI11.hpp>

#include "qtomo/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quantum state tomography protocol quality"};
  app.set_version_flag("--version", std::string(qtomo::version()));
  app.require_subcommand(1);

  qtomo::CommandLine cli;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"info", "Measurement-matrix analysis and unity check of a protocol"},
      {"scan", "Bloch-sphere, plate-thickness or B9 delta scans"},
      {"simulate", "Monte Carlo trials, ML fits and goodness of fit"},
      {"reconstruct", "ML and pseudo-inverse reconstruction from a counts file"},
      {"bounds", "Lower bounds on the precision-loss functional"},
      {"distribution", "Loss coefficients, moments and quantile bands"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--out", out, "Output directory (overrides the config)");
    sub->add_option("--threads", threads, "Worker threads, 0 = auto")->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qtomo::exit_config;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    cli.command = sub->get_name();
    if (sub->count("--seed")) cli.seed = seed;
    if (sub->count("--out")) cli.out = out;
    if (sub->count("--threads")) cli.threads = threads;
  }
  cli.config = config;
  return qtomo::run(cli, std::cout, std::cerr);
}
