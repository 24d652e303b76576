#include <CLI11.hpp>

#include <iostream>

#include "upsilon/experiment.hpp"
#include "upsilon/svg_plot.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Class-mismatched semi-supervised learning experiments"};
  app.require_subcommand(1);

  upsilon::RunOptions run;
  std::string out_dir;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config and write results, plots and a manifest");
  run_cmd->add_option("--config", run.config_path, "Experiment config file")->required();
  run_cmd->add_option("--workers", run.workers, "Worker threads (0 = all cores)");
  run_cmd->add_option("--out", out_dir, "Output directory (overrides experiment.output_dir)");

  std::string csv_path;
  std::string spec_path;
  std::string svg_path;
  auto* plot_cmd = app.add_subcommand("plot", "Render a CSV as an SVG line plot with std bands");
  plot_cmd->add_option("--csv", csv_path, "Input CSV")->required();
  plot_cmd->add_option("--spec", spec_path, "Plot spec file")->required();
  plot_cmd->add_option("--out", svg_path, "Output SVG")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) {
    if (!out_dir.empty()) run.output_dir = out_dir;
    return upsilon::run_command(run, std::cerr);
  }
  try {
    upsilon::plot_csv(csv_path, upsilon::load_plot_spec(spec_path), svg_path);
  } catch (const std::exception& e) {
    std::cerr << "plot error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
