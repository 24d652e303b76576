#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "upsilon/experiment.hpp"

namespace upsilon {

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Strategies: return "strategies";
    case ExperimentKind::Imbalance: return "imbalance";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::Ablation: return "ablation";
    case ExperimentKind::KSweep: return "ksweep";
    case ExperimentKind::SinkhornBench: return "sinkhorn_bench";
  }
  return "?";
}

namespace {

ExperimentKind parse_kind(const std::string& key, std::string_view v) {
  for (auto k : {ExperimentKind::Strategies, ExperimentKind::Imbalance, ExperimentKind::Sweep, ExperimentKind::Ablation,
                 ExperimentKind::KSweep, ExperimentKind::SinkhornBench}) {
    if (to_string(k) == v) return k;
  }
  throw ConfigError(key, "unknown experiment kind '" + std::string(v) + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

std::map<std::string, std::map<std::string, Setter>> setters(ExperimentConfig& c) {
  auto& b = c.benchmark;
  auto& t = c.train;
  const auto size = [](std::size_t& field) {
    return [&field](const std::string& k, const std::string& v) { field = to_int<std::size_t>(k, v); };
  };
  const auto integer = [](int& field) {
    return [&field](const std::string& k, const std::string& v) { field = to_int<int>(k, v); };
  };
  const auto real = [](double& field) {
    return [&field](const std::string& k, const std::string& v) { field = to_double(k, v); };
  };
  return {
      {"experiment",
       {
           {"kind", [&](const std::string& k, const std::string& v) { c.kind = parse_kind(k, v); }},
           {"seeds", size(c.n_seeds)},
           {"base_seed", [&](const std::string& k, const std::string& v) { c.base_seed = to_int<std::uint64_t>(k, v); }},
           {"ratios",
            [&](const std::string& k, const std::string& v) {
              c.ratios.clear();
              for (const auto& item : split_list(v)) c.ratios.push_back(to_double(k, item));
            }},
           {"variants",
            [&](const std::string& k, const std::string& v) {
              c.variants.clear();
              for (const auto& item : split_list(v)) {
                try {
                  c.variants.push_back(parse_variant(item));
                } catch (const std::invalid_argument&) {
                  throw ConfigError(k, "unknown variant '" + item + "'");
                }
              }
            }},
           {"k_values",
            [&](const std::string& k, const std::string& v) {
              c.k_values.clear();
              for (const auto& item : split_list(v)) c.k_values.push_back(to_int<std::size_t>(k, item));
            }},
           {"sinkhorn_iters",
            [&](const std::string& k, const std::string& v) {
              c.sinkhorn_iters.clear();
              for (const auto& item : split_list(v)) c.sinkhorn_iters.push_back(to_int<int>(k, item));
            }},
           {"reassign_maps", size(c.reassign_maps)},
           {"trials", size(c.trials)},
           {"bench_repeats", size(c.bench_repeats)},
           {"write_logs", [&](const std::string& k, const std::string& v) { c.write_logs = to_bool(k, v); }},
           {"output_dir", [&](const std::string&, const std::string& v) { c.output_dir = v; }},
       }},
      {"benchmark",
       {
           {"k_id", size(b.k_id)},
           {"k_ood", size(b.k_ood)},
           {"d", size(b.d)},
           {"signal_dim", size(b.signal_dim)},
           {"n_labeled_per_class", size(b.n_labeled_per_class)},
           {"m_unlabeled", size(b.m_unlabeled)},
           {"n_test_per_class", size(b.n_test_per_class)},
           {"mismatch_ratio", real(b.mismatch_ratio)},
           {"class_separation", real(b.class_separation)},
           {"noise_sigma", real(b.noise_sigma)},
           {"ood_imbalance_ratio", real(b.ood_imbalance_ratio)},
       }},
      {"train",
       {
           {"tau", real(t.tau)},
           {"gamma", real(t.gamma)},
           {"k_extra", size(t.k_extra)},
           {"epochs", integer(t.epochs)},
           {"pretrain_epochs", integer(t.pretrain_epochs)},
           {"pl_interval", integer(t.pl_interval)},
           {"learning_rate", real(t.learning_rate)},
           {"batch_size", size(t.batch_size)},
           {"ema_decay", real(t.ema_decay)},
           {"lambda_ramp", [&](const std::string& k, const std::string& v) { t.lambda_ramp_enabled = to_bool(k, v); }},
           {"ramp_horizon", real(t.ramp_horizon)},
           {"hidden", size(t.hidden)},
           {"confidence",
            [&](const std::string& k, const std::string& v) {
              try {
                t.confidence = parse_confidence_measure(v);
              } catch (const std::invalid_argument&) {
                throw ConfigError(k, "unknown confidence measure '" + v + "'");
              }
            }},
           {"confidence_scope",
            [&](const std::string& k, const std::string& v) {
              if (v == "all") t.confidence_scope = ConfidenceScope::AllColumns;
              else if (v == "id") t.confidence_scope = ConfidenceScope::IdColumns;
              else throw ConfigError(k, "expected all or id, got '" + v + "'");
            }},
           {"alt_high_threshold", [&](const std::string& k, const std::string& v) { t.alt_high_threshold = to_double(k, v); }},
           {"alt_low_threshold", [&](const std::string& k, const std::string& v) { t.alt_low_threshold = to_double(k, v); }},
           {"eval_tail_fraction", real(t.eval_tail_fraction)},
           {"sinkhorn_reg", real(t.sinkhorn.reg)},
           {"sinkhorn_max_iters", integer(t.sinkhorn.max_iters)},
           {"sinkhorn_tol", real(t.sinkhorn.marginal_tol)},
       }},
  };
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_seeds < 1) throw ConfigError("experiment.seeds", "must be >= 1");
  if (ratios.empty()) throw ConfigError("experiment.ratios", "must list at least one ratio");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("experiment.ratios", "entries must lie in [0, 1]");
  }
  if (reassign_maps < 1) throw ConfigError("experiment.reassign_maps", "must be >= 1");
  if (kind == ExperimentKind::Imbalance && trials < 1) throw ConfigError("experiment.trials", "must be >= 1");
  if (kind == ExperimentKind::SinkhornBench) {
    if (sinkhorn_iters.empty()) throw ConfigError("experiment.sinkhorn_iters", "must list at least one count");
    for (int it : sinkhorn_iters) {
      if (it < 1) throw ConfigError("experiment.sinkhorn_iters", "entries must be >= 1");
    }
    if (bench_repeats < 1) throw ConfigError("experiment.bench_repeats", "must be >= 1");
  }
  if (kind == ExperimentKind::Strategies) {
    for (const auto& v : variants) {
      if (v.kind != VariantKind::Strategy) throw ConfigError("experiment.variants", v.name() + " is not a strategy");
    }
  }
  try {
    benchmark.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("benchmark", e.what());
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("train", e.what());
  }
  const bool uses_ratios = kind != ExperimentKind::Imbalance && kind != ExperimentKind::SinkhornBench;
  for (double r : uses_ratios ? ratios : std::vector<double>{benchmark.mismatch_ratio}) {
    if (r > 0.0 && benchmark.k_ood == 0) throw ConfigError("benchmark.k_ood", "must be >= 1 when a ratio is > 0");
  }
  if (output_dir.empty()) throw ConfigError("experiment.output_dir", "must not be empty");
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }

  ExperimentConfig cfg;
  auto table = setters(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(section, "key outside a section");
    const auto sec = table.find(section);
    if (sec == table.end()) throw ConfigError(section, "unknown section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) throw ConfigError(full, "unknown key");
      it->second(full, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

}  // namespace upsilon
