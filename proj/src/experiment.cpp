#include "upsilon/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "upsilon/content_hash.hpp"
#include "upsilon/kernels.hpp"
#include "upsilon/svg_plot.hpp"
#include "upsilon/worker_pool.hpp"

namespace upsilon {

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

struct Measurement {
  double x = 0.0;
  std::string metric;
  double value = 0.0;
};

struct CellResult {
  std::vector<Measurement> metrics;
  std::vector<Measurement> timings;
  std::vector<RoundRow> rounds;
  std::optional<TrainResult> log;
};

struct Cell {
  std::string series;
  double x = 0.0;
  std::size_t seed_index = 0;
  std::function<CellResult()> run;

  std::string name() const {
    return "series=" + series + " x=" + fmt(x) + " seed_index=" + std::to_string(seed_index);
  }
};

std::vector<Variant> default_variants(ExperimentKind kind) {
  const auto strategy = [](StrategyKind k) { return Variant::of(k); };
  switch (kind) {
    case ExperimentKind::Strategies:
      return {strategy(StrategyKind::Baseline), strategy(StrategyKind::ReAssigned), strategy(StrategyKind::OpenSet),
              strategy(StrategyKind::Oracle)};
    case ExperimentKind::Ablation:
      return {strategy(StrategyKind::Baseline), Variant::of(VariantKind::VanillaPL), Variant::of(VariantKind::RPLOnly),
              Variant::of(VariantKind::SECOnly), Variant::of(VariantKind::OpenSetK1), Variant::upsilon()};
    default:
      return {strategy(StrategyKind::Baseline), Variant::of(VariantKind::VanillaPL), Variant::upsilon()};
  }
}

BenchmarkSpec spec_at(const ExperimentConfig& cfg, double ratio, std::size_t seed_index) {
  BenchmarkSpec spec = cfg.benchmark;
  spec.mismatch_ratio = ratio;
  spec.seed = cfg.cell_seed(seed_index);
  return spec;
}

TrainConfig train_for(const ExperimentConfig& cfg, const Variant& v, std::size_t seed_index) {
  TrainConfig t = cfg.train;
  t.k_extra = variant_k_extra(v, cfg.train.k_extra, cfg.benchmark.k_ood);
  t.seed = cfg.cell_seed(seed_index);
  return t;
}

void add_training_metrics(CellResult& out, double x, const TrainResult& r, const std::string& series,
                          std::size_t seed_index, bool keep_log) {
  out.metrics.push_back({x, "accuracy", r.final_accuracy});
  if (!r.rounds.empty()) {
    const auto& last = r.rounds.back();
    out.metrics.push_back({x, "ood_as_id_prop", last.ood_as_id_prop});
    out.metrics.push_back({x, "n_pseudo_rpl", static_cast<double>(last.n_rpl)});
    out.metrics.push_back({x, "n_pseudo_sec", static_cast<double>(last.n_sec)});
  }
  for (const auto& round : r.rounds) out.rounds.push_back({series, x, seed_index, round});
  if (keep_log) out.log = r;
}

std::string ratio_series(const std::string& name, const ExperimentConfig& cfg, double ratio) {
  return cfg.ratios.size() > 1 ? name + "@" + fmt(ratio) : name;
}

std::vector<Cell> training_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  const auto variants = cfg.variants.empty() ? default_variants(cfg.kind) : cfg.variants;
  for (double ratio : cfg.ratios) {
    for (const auto& v : variants) {
      for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
        Cell cell{v.name(), ratio, s, {}};
        cell.run = [&cfg, v, ratio, s, series = cell.series] {
          CellResult out;
          const auto ds = generate(spec_at(cfg, ratio, s));
          const auto train = train_for(cfg, v, s);
          if (v.kind == VariantKind::Strategy && v.strategy.kind == StrategyKind::ReAssigned) {
            // Best of several injective maps.
            const auto maps = sample_reassignments(ds.k_id, ds.k_ood, cfg.reassign_maps, train.seed);
            std::optional<TrainResult> best;
            double mean = 0.0;
            for (const auto& map : maps) {
              Variant mapped = v;
              mapped.strategy.reassign = map;
              auto r = train_variant(ds, train, mapped);
              mean += r.final_accuracy;
              if (!best || r.final_accuracy > best->final_accuracy) best = std::move(r);
            }
            if (!best) {
              // Nothing to reassign (no OOD classes): identical to the baseline.
              best = train_variant(ds, train, Variant::of(StrategyKind::Baseline));
              mean = best->final_accuracy;
            } else {
              mean /= static_cast<double>(maps.size());
            }
            add_training_metrics(out, ratio, *best, series, s, cfg.write_logs);
            out.metrics.push_back({ratio, "accuracy_map_mean", mean});
            return out;
          }
          add_training_metrics(out, ratio, train_variant(ds, train, v), series, s, cfg.write_logs);
          return out;
        };
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::vector<Cell> ksweep_cells(const ExperimentConfig& cfg) {
  auto k_values = cfg.k_values;
  if (k_values.empty()) k_values = {0, 1, cfg.benchmark.k_ood, 2 * cfg.benchmark.k_ood};
  std::sort(k_values.begin(), k_values.end());
  k_values.erase(std::unique(k_values.begin(), k_values.end()), k_values.end());

  std::vector<Cell> cells;
  for (double ratio : cfg.ratios) {
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
      // The baseline does not depend on K; it runs once and is reported at every K.
      Cell base{ratio_series("Baseline", cfg, ratio), static_cast<double>(k_values.front()), s, {}};
      base.run = [&cfg, ratio, s, k_values] {
        CellResult out;
        const auto ds = generate(spec_at(cfg, ratio, s));
        const Variant v = Variant::of(StrategyKind::Baseline);
        const auto r = train_variant(ds, train_for(cfg, v, s), v);
        for (auto k : k_values) out.metrics.push_back({static_cast<double>(k), "accuracy", r.final_accuracy});
        return out;
      };
      cells.push_back(std::move(base));
      for (auto k : k_values) {
        Cell cell{ratio_series("Upsilon", cfg, ratio), static_cast<double>(k), s, {}};
        cell.run = [&cfg, ratio, s, k, series = cell.series] {
          CellResult out;
          const auto ds = generate(spec_at(cfg, ratio, s));
          // K = 0 leaves no extra classes: the RPL-only model.
          const Variant v = k == 0 ? Variant::of(VariantKind::RPLOnly) : Variant::upsilon();
          TrainConfig train = train_for(cfg, v, s);
          train.k_extra = k;
          add_training_metrics(out, static_cast<double>(k), train_variant(ds, train, v), series, s, cfg.write_logs);
          return out;
        };
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::vector<Cell> sinkhorn_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    Cell cell{"Sinkhorn", 0.0, s, {}};
    cell.run = [&cfg, s] {
      CellResult out;
      const auto ds = generate(spec_at(cfg, cfg.benchmark.mismatch_ratio, s));
      const Variant v = Variant::upsilon();
      TrainConfig train = train_for(cfg, v, s);
      if (train.k_extra == 0) train.k_extra = cfg.benchmark.k_ood;
      const auto trained = train_variant(ds, train, v);

      using clock = std::chrono::steady_clock;
      const auto median_ms = [&](const TrainConfig& c, const Variant& variant) {
        std::vector<double> ms;
        for (std::size_t r = 0; r < cfg.bench_repeats; ++r) {
          const auto t0 = clock::now();
          const auto round = pseudo_label_round(trained.params, ds, trained.label_space, c, variant);
          const auto t1 = clock::now();
          if (round.labels.size() > ds.unlabeled_x.rows()) throw std::logic_error("round labeled too many samples");
          ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2), ms.end());
        return ms[ms.size() / 2];
      };

      for (int iters : cfg.sinkhorn_iters) {
        TrainConfig c = train;
        c.sinkhorn.max_iters = iters;
        c.sinkhorn.marginal_tol = 1e-300;  // run every iteration
        const auto round = pseudo_label_round(trained.params, ds, trained.label_space, c, v);
        const double x = iters;
        out.metrics.push_back({x, "residual", round.log.sec_residual});
        out.metrics.push_back({x, "iterations", static_cast<double>(round.log.sec_iterations)});
        out.metrics.push_back({x, "n_pseudo_sec", static_cast<double>(round.log.n_sec)});
        out.timings.push_back({x, "round_ms", median_ms(c, v)});
      }
      out.timings.push_back({0.0, "vanilla_round_ms", median_ms(train, Variant::of(VariantKind::VanillaPL))});
      return out;
    };
    cells.push_back(std::move(cell));
  }
  return cells;
}

// Rows sorted by (series in first-seen order, x, seed_index, metric emission order).
void sort_rows(std::vector<ResultRow>& rows) {
  std::map<std::string, std::size_t> rank;
  for (const auto& r : rows) rank.emplace(r.series, rank.size());
  std::stable_sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    const auto ka = std::tuple(rank.at(a.series), a.x, a.seed_index.value_or(0));
    const auto kb = std::tuple(rank.at(b.series), b.x, b.seed_index.value_or(0));
    return ka < kb;
  });
}

}  // namespace

std::vector<ResultRow> with_summary(std::vector<ResultRow> cell_rows) {
  std::vector<std::string> series_order;
  std::map<std::tuple<std::string, double, std::string>, std::vector<double>> groups;
  std::vector<std::tuple<std::string, double, std::string>> order;
  for (const auto& r : cell_rows) {
    if (std::find(series_order.begin(), series_order.end(), r.series) == series_order.end())
      series_order.push_back(r.series);
    const auto key = std::tuple(r.series, r.x, r.metric);
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back(r.value);
  }
  std::vector<ResultRow> out = std::move(cell_rows);
  for (const auto& key : order) {
    const auto& values = groups[key];
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    const auto& [series, x, metric] = key;
    out.push_back({"mean", series, x, std::nullopt, metric, mean});
    out.push_back({"std", series, x, std::nullopt, metric, sd});
  }
  return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "row_type,series,x,seed_index,metric,value\n";
  for (const auto& r : rows) {
    os << r.row_type << ',' << r.series << ',' << fmt(r.x) << ',';
    if (r.seed_index) os << *r.seed_index;
    os << ',' << r.metric << ',' << fmt(r.value) << '\n';
  }
}

void write_rounds_csv(std::ostream& os, const std::vector<RoundRow>& rows) {
  os << "series,x,seed_index,epoch,n_rpl,n_sec,rpl_quota,ood_as_id_prop,kl_imbalance,sec_residual,sec_iterations\n";
  for (const auto& r : rows) {
    os << r.series << ',' << fmt(r.x) << ',' << r.seed_index << ',' << r.round.epoch << ',' << r.round.n_rpl << ','
       << r.round.n_sec << ',' << r.round.rpl_quota << ',' << fmt(r.round.ood_as_id_prop) << ',';
    if (r.round.kl_imbalance) os << fmt(*r.round.kl_imbalance);
    os << ',' << fmt(r.round.sec_residual) << ',' << r.round.sec_iterations << '\n';
  }
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
  cfg.validate();
  ExperimentOutput output;

  if (cfg.kind == ExperimentKind::Imbalance) {
    BenchmarkSpec spec = cfg.benchmark;
    try {
      output.imbalance = imbalance_study(spec, cfg.train, cfg.trials, cfg.cell_seed(0), workers);
    } catch (const std::exception& e) {
      throw CellError("imbalance study", e.what());
    }
    std::vector<ResultRow> rows;
    for (const auto& t : output.imbalance) {
      const double x = static_cast<double>(t.trial);
      rows.push_back({"cell", "ID", x, t.trial, "kl", t.kl_id});
      rows.push_back({"cell", "ID", x, t.trial, "imbalance_ratio", t.r_id.value});
      if (t.kl_ood) {
        rows.push_back({"cell", "OOD", x, t.trial, "kl", *t.kl_ood});
        rows.push_back({"cell", "OOD", x, t.trial, "imbalance_ratio", t.r_ood->value});
      }
    }
    sort_rows(rows);
    output.rows = std::move(rows);
    return output;
  }

  std::vector<Cell> cells;
  switch (cfg.kind) {
    case ExperimentKind::KSweep: cells = ksweep_cells(cfg); break;
    case ExperimentKind::SinkhornBench: cells = sinkhorn_cells(cfg); break;
    default: cells = training_cells(cfg); break;
  }

  std::vector<CellResult> results(cells.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    try {
      results[i] = cells[i].run();
    } catch (const std::exception& e) {
      throw CellError(cells[i].name(), e.what());
    }
  });

  std::vector<ResultRow> rows;
  std::vector<ResultRow> timings;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (const auto& m : results[i].metrics)
      rows.push_back({"cell", cells[i].series, m.x, cells[i].seed_index, m.metric, m.value});
    for (const auto& m : results[i].timings)
      timings.push_back({"cell", cells[i].series, m.x, cells[i].seed_index, m.metric, m.value});
    for (auto& r : results[i].rounds) output.rounds.push_back(std::move(r));
    if (results[i].log) output.logs.emplace_back(cells[i].name(), std::move(*results[i].log));
  }
  sort_rows(rows);
  sort_rows(timings);
  output.rows = with_summary(std::move(rows));
  output.timings = with_summary(std::move(timings));
  return output;
}

namespace {

nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  std::vector<std::string> variants;
  const auto used = cfg.variants.empty() ? default_variants(cfg.kind) : cfg.variants;
  for (const auto& v : used) variants.push_back(v.name());
  j["experiment"] = {{"kind", std::string(to_string(cfg.kind))},
                     {"seeds", cfg.n_seeds},
                     {"base_seed", cfg.base_seed},
                     {"ratios", cfg.ratios},
                     {"variants", variants},
                     {"k_values", cfg.k_values},
                     {"sinkhorn_iters", cfg.sinkhorn_iters},
                     {"reassign_maps", cfg.reassign_maps},
                     {"trials", cfg.trials},
                     {"bench_repeats", cfg.bench_repeats},
                     {"write_logs", cfg.write_logs},
                     {"output_dir", cfg.output_dir.string()}};
  const auto& b = cfg.benchmark;
  j["benchmark"] = {{"k_id", b.k_id},
                    {"k_ood", b.k_ood},
                    {"d", b.d},
                    {"signal_dim", b.signal_dim},
                    {"n_labeled_per_class", b.n_labeled_per_class},
                    {"m_unlabeled", b.m_unlabeled},
                    {"n_test_per_class", b.n_test_per_class},
                    {"mismatch_ratio", b.mismatch_ratio},
                    {"class_separation", b.class_separation},
                    {"noise_sigma", b.noise_sigma},
                    {"ood_imbalance_ratio", b.ood_imbalance_ratio}};
  const auto& t = cfg.train;
  j["train"] = {{"tau", t.tau},
                {"gamma", t.gamma},
                {"k_extra", t.k_extra},
                {"epochs", t.epochs},
                {"pretrain_epochs", t.pretrain_epochs},
                {"pl_interval", t.pl_interval},
                {"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"ema_decay", t.ema_decay},
                {"lambda_ramp", t.lambda_ramp_enabled},
                {"ramp_horizon", t.ramp_horizon},
                {"hidden", t.hidden},
                {"confidence", std::string(to_string(t.confidence))},
                {"confidence_scope", t.confidence_scope == ConfidenceScope::AllColumns ? "all" : "id"},
                {"eval_tail_fraction", t.eval_tail_fraction},
                {"sinkhorn_reg", t.sinkhorn.reg},
                {"sinkhorn_max_iters", t.sinkhorn.max_iters},
                {"sinkhorn_tol", t.sinkhorn.marginal_tol}};
  if (t.alt_high_threshold) j["train"]["alt_high_threshold"] = *t.alt_high_threshold;
  if (t.alt_low_threshold) j["train"]["alt_low_threshold"] = *t.alt_low_threshold;
  return j;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <typename Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

PlotSpec metric_plot(const std::string& metric, const std::string& x_label, const std::string& title) {
  PlotSpec spec;
  spec.filters = {{"metric", metric}};
  spec.x_label = x_label;
  spec.y_label = metric;
  spec.title = title;
  return spec;
}

void write_plots(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const auto plots = out / "plots";
  std::filesystem::create_directories(plots);
  const auto results = out / "results.csv";
  switch (cfg.kind) {
    case ExperimentKind::Strategies:
      plot_csv(results, metric_plot("accuracy", "mismatch ratio", "OOD labeling strategies"), plots / "accuracy.svg");
      break;
    case ExperimentKind::Imbalance:
      plot_csv(results, metric_plot("kl", "trial", "Pseudo-label imbalance (KL to uniform)"), plots / "kl.svg");
      break;
    case ExperimentKind::Sweep:
    case ExperimentKind::Ablation: {
      plot_csv(results, metric_plot("accuracy", "mismatch ratio", "ID test accuracy"), plots / "accuracy.svg");
      plot_csv(results, metric_plot("ood_as_id_prop", "mismatch ratio", "OOD pseudo-labeled as ID"),
               plots / "ood_as_id_prop.svg");
      if (std::filesystem::file_size(out / "rounds.csv") == 0) break;
      for (double r : cfg.ratios) {
        if (r == 0.0) continue;
        PlotSpec spec;
        spec.y_column = "ood_as_id_prop";
        spec.x_column = "epoch";
        spec.filters = {{"x", fmt(r)}};
        spec.x_label = "epoch";
        spec.title = "OOD pseudo-labeled as ID, ratio " + fmt(r);
        plot_csv(out / "rounds.csv", spec, plots / ("rounds_ood_as_id_r" + fmt(r) + ".svg"));
      }
      break;
    }
    case ExperimentKind::KSweep:
      plot_csv(results, metric_plot("accuracy", "K (extra classes)", "Accuracy vs K"), plots / "accuracy.svg");
      break;
    case ExperimentKind::SinkhornBench: {
      auto residual = metric_plot("residual", "Sinkhorn iterations", "Marginal violation before rounding");
      residual.log2_x = true;
      plot_csv(results, residual, plots / "residual.svg");
      auto runtime = metric_plot("round_ms", "Sinkhorn iterations", "Pseudo-labeling round time (ms)");
      runtime.log2_x = true;
      plot_csv(out / "timings.csv", runtime, plots / "round_ms.svg");
      break;
    }
  }
}

std::string sanitize(std::string name) {
  for (char& c : name) {
    if (c == ' ' || c == '=' || c == '@') c = '_';
  }
  return name;
}

}  // namespace

int run_command(const RunOptions& options, std::ostream& err) {
  ExperimentConfig cfg;
  std::string config_text;
  try {
    std::ifstream in(options.config_path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read " + options.config_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    config_text = ss.str();
    cfg = parse_experiment_config(config_text);
    if (options.output_dir) cfg.output_dir = *options.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg.output_dir)) {
      throw ConfigError("experiment.output_dir", "cannot create " + cfg.output_dir.string());
    }
    std::ofstream probe(cfg.output_dir / ".write_test");
    if (!probe) throw ConfigError("experiment.output_dir", cfg.output_dir.string() + " is not writable");
    probe.close();
    std::filesystem::remove(cfg.output_dir / ".write_test", ec);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  }

  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t workers = resolve_workers(options.workers);
  try {
    const auto output = run_experiment(cfg, workers);
    const auto& out = cfg.output_dir;
    write_text(out / "results.csv", to_text([&](std::ostream& os) { write_results_csv(os, output.rows); }));
    if (!output.timings.empty())
      write_text(out / "timings.csv", to_text([&](std::ostream& os) { write_results_csv(os, output.timings); }));
    if (cfg.kind == ExperimentKind::Sweep || cfg.kind == ExperimentKind::Ablation || cfg.kind == ExperimentKind::KSweep)
      write_text(out / "rounds.csv", to_text([&](std::ostream& os) { write_rounds_csv(os, output.rounds); }));
    if (!output.imbalance.empty())
      write_text(out / "imbalance_trials.csv",
                 to_text([&](std::ostream& os) { write_imbalance_csv(os, output.imbalance); }));
    if (!output.logs.empty()) {
      std::filesystem::create_directories(out / "logs");
      for (const auto& [name, log] : output.logs)
        write_text(out / "logs" / (sanitize(name) + ".csv"),
                   to_text([&](std::ostream& os) { write_metric_log(os, log); }));
    }
    write_plots(cfg, out);

    nlohmann::json manifest;
    manifest["config_path"] = options.config_path.string();
    manifest["config_sha1"] = git_blob_sha1(config_text);
    manifest["resolved_config"] = config_json(cfg);
    manifest["started_utc"] = started;
    manifest["finished_utc"] = utc_now();
    manifest["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest["workers"] = workers;
    manifest["simd_kernels"] = std::string(kernels::active().name);
    manifest["accuracy_reported"] = "mean ID test accuracy of the EMA model over the last " +
                                    fmt(100.0 * cfg.train.eval_tail_fraction) + "% of epochs";
    manifest["cell_seed"] = "base_seed * 1000 + seed_index";
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
  } catch (const CellError& e) {
    err << "runtime error in " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace upsilon
