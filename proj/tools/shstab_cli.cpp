#include <iostream>

#include <CLI11.hpp>

#include "shstab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sample-and-hold stabilization experiments under inexact optimization"};
  app.require_subcommand(1);

  std::string config;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool dense = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config, "experiment config file")->required();
    cmd->add_option("--output-dir", output_dir, "override the output directory");
    cmd->add_option("--seed", seed, "override the sampling seed");
    cmd->add_flag("--dense", dense, "record every integrator substep");
  };
  auto* run = app.add_subcommand("run", "simulate the accuracy sweep and write CSV artifacts");
  add_common(run);
  auto* certify = app.add_subcommand("certify", "compute the margin certificate");
  add_common(certify);
  app.add_subcommand("selftest", "run the built-in property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : shstab::kExitConfig;
  }

  shstab::CliOverrides overrides;
  if (!output_dir.empty()) overrides.output_dir = output_dir;
  if (app.got_subcommand(run) || app.got_subcommand(certify)) {
    auto* cmd = app.got_subcommand(run) ? run : certify;
    if (cmd->count("--seed") > 0) overrides.seed = seed;
  }
  overrides.dense = dense;

  if (app.got_subcommand(run)) return shstab::run_command(config, overrides, std::cout, std::cerr);
  if (app.got_subcommand(certify)) return shstab::certify_command(config, overrides, std::cout, std::cerr);
  return shstab::selftest_command(std::cout);
}
