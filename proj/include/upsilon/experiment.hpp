#pragma once

// Experiment runner: expands a config into (series, x, seed) cells, runs them
// on a worker pool, and writes tidy CSV results plus plots and a manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "upsilon/datagen.hpp"
#include "upsilon/diagnostics.hpp"
#include "upsilon/trainer.hpp"

namespace upsilon {

enum class ExperimentKind { Strategies, Imbalance, Sweep, Ablation, KSweep, SinkhornBench };

std::string_view to_string(ExperimentKind kind);

// A config problem; `key` names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// A failure while running one experiment cell.
class CellError : public std::runtime_error {
 public:
  CellError(std::string cell, const std::string& message)
      : std::runtime_error("cell " + cell + ": " + message), cell_(std::move(cell)) {}
  const std::string& cell() const { return cell_; }

 private:
  std::string cell_;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Sweep;
  BenchmarkSpec benchmark;
  TrainConfig train;
  std::vector<Variant> variants;
  std::vector<double> ratios{1.0};
  std::vector<std::size_t> k_values;
  std::vector<int> sinkhorn_iters{1, 2, 4, 8, 16, 32};
  std::size_t n_seeds = 5;
  std::uint64_t base_seed = 1;
  std::size_t reassign_maps = 10;
  std::size_t trials = 20;
  std::size_t bench_repeats = 5;
  bool write_logs = false;
  std::filesystem::path output_dir = "results";

  // Seed of cell (seed_index): base_seed * 1000 + seed_index.
  std::uint64_t cell_seed(std::size_t seed_index) const { return base_seed * 1000 + seed_index; }

  // Throws ConfigError naming the first violated setting.
  void validate() const;
};

// INI-style text: [experiment], [benchmark], [train] sections of key = value
// lines; lists are comma separated. Unknown sections or keys are errors.
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ResultRow {
  std::string row_type;  // cell | mean | std
  std::string series;
  double x = 0.0;
  std::optional<std::size_t> seed_index;
  std::string metric;
  double value = 0.0;
};

struct RoundRow {
  std::string series;
  double x = 0.0;
  std::size_t seed_index = 0;
  RoundLog round;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;     // deterministic; results.csv
  std::vector<ResultRow> timings;  // wall-clock measurements; timings.csv
  std::vector<RoundRow> rounds;    // per pseudo-labeling round; rounds.csv
  std::vector<ImbalanceTrial> imbalance;
  std::vector<std::pair<std::string, TrainResult>> logs;  // filled when write_logs
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1);

// Appends mean/std rows (sample std, n-1) per (series, x, metric) over seeds.
std::vector<ResultRow> with_summary(std::vector<ResultRow> cell_rows);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_rounds_csv(std::ostream& os, const std::vector<RoundRow>& rows);

struct RunOptions {
  std::filesystem::path config_path;
  std::optional<std::filesystem::path> output_dir;
  std::size_t workers = 1;
};

// Full `run` command: 0 on success, 1 on a config violation, 2 on a runtime
// failure; diagnostics go to `err`.
int run_command(const RunOptions& options, std::ostream& err);

}  // namespace upsilon
