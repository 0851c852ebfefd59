#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fullmatch/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"FullMatch semi-supervised learning lab"};
  app.set_version_flag("--version", fullmatch::version_string());
  app.require_subcommand(1);

  std::string config_path, out_dir, run_dir, what, out_path, run_a, run_b;
  std::optional<std::uint64_t> seed;
  std::uint64_t gradcheck_seed = 0;
  std::size_t seeds = 1, instances = 100;

  auto* train = app.add_subcommand("train", "Train one configuration");
  train->add_option("--config", config_path, "key = value config file")->required();
  train->add_option("--out", out_dir, "Run output directory")->required();
  train->add_option("--seed", seed, "Override the config seed");

  auto* ablate = app.add_subcommand("ablate", "Run the method and alpha/beta ablation grids");
  ablate->add_option("--config", config_path, "Base config file")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--seeds", seeds, "Seeds per cell, starting at the config seed")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss and the model");
  gradcheck->add_option("--seed", gradcheck_seed, "Random instance seed");
  gradcheck->add_option("--instances", instances, "Random instances per loss");

  auto* exporter = app.add_subcommand("export", "Export curves or the dataset of a finished run");
  exporter->add_option("--run", run_dir, "Run directory")->required();
  exporter->add_option("--what", what, "curves | dataset")->required()->check(CLI::IsMember({"curves", "dataset"}));
  exporter->add_option("--out", out_path, "Output file (default: inside the run directory)");

  auto* compare = app.add_subcommand("compare", "Compare accuracy and step time of two runs");
  compare->add_option("run_a", run_a, "Baseline run directory")->required();
  compare->add_option("run_b", run_b, "Compared run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (*train) return fullmatch::cmd_train(config_path, out_dir, seed, std::cout, std::cerr);
  if (*ablate) return fullmatch::cmd_ablate(config_path, out_dir, seeds, std::cout, std::cerr);
  if (*gradcheck) return fullmatch::cmd_gradcheck(gradcheck_seed, instances, std::cout, std::cerr);
  if (*exporter) return fullmatch::cmd_export(run_dir, what, out_path, std::cout, std::cerr);
  if (*compare) return fullmatch::cmd_compare(run_a, run_b, std::cout, std::cerr);
  return 1;
}
