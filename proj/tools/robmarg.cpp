#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "robmarg/cli.hpp"
#include "robmarg/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Robust marginal location estimation with missing responses"};
  app.require_subcommand(1);

  std::filesystem::path data, config, out;
  auto* estimate = app.add_subcommand("estimate", "Estimate marginal locations from a CSV file");
  estimate->add_option("--data", data, "CSV input")->required();
  estimate->add_option("--config", config, "JSON configuration")->required();
  estimate->add_option("--out", out, "Output directory")->required();

  std::filesystem::path sim_config, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Run Monte Carlo scenarios");
  simulate->add_option("--config", sim_config, "JSON scenario list")->required();
  simulate->add_option("--out", sim_out, "Output directory")->required();

  std::size_t reps = 20, n = 1000000;
  std::uint64_t seed = 20190501;
  auto* targets = app.add_subcommand("targets", "Monte Carlo values of the population functionals");
  targets->add_option("--reps", reps, "Replications");
  targets->add_option("--n", n, "Sample size per replication");
  targets->add_option("--seed", seed, "Master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*estimate) return robmarg::cmd_estimate(data, config, out);
    if (*simulate) return robmarg::cmd_simulate(sim_config, sim_out);
    return robmarg::cmd_targets(reps, n, seed);
  } catch (const robmarg::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
