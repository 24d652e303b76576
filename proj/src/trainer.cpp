#include "upsilon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "upsilon/diagnostics.hpp"
#include "upsilon/pseudo_labeling.hpp"

namespace upsilon {

void TrainConfig::validate() const {
  if (confidence == ConfidenceMeasure::MaxProb) {
    if (!(gamma > 0.0 && gamma <= tau && tau < 1.0)) {
      throw std::invalid_argument("train config needs 0 < gamma <= tau < 1 (gamma=" + std::to_string(gamma) +
                                  ", tau=" + std::to_string(tau) + ")");
    }
  } else if (!alt_high_threshold || !alt_low_threshold || *alt_low_threshold > *alt_high_threshold) {
    throw std::invalid_argument("non-MaxProb confidence needs alt_low_threshold <= alt_high_threshold");
  }
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (pretrain_epochs < 0 || pretrain_epochs >= epochs) throw std::invalid_argument("need 0 <= pretrain_epochs < epochs");
  if (pl_interval < 1) throw std::invalid_argument("pl_interval must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw std::invalid_argument("ema_decay must lie in [0, 1)");
  if (!(ramp_horizon > 0.0)) throw std::invalid_argument("ramp_horizon must be positive");
  if (!(eval_tail_fraction > 0.0 && eval_tail_fraction <= 1.0)) throw std::invalid_argument("eval_tail_fraction must lie in (0, 1]");
  sinkhorn.validate();
}

double lambda_ramp(double iter, double horizon) {
  if (iter < 0.0) throw std::invalid_argument("lambda_ramp: iter must be >= 0");
  const double progress = std::min(iter / horizon, 1.0);
  const double gap = 1.0 - progress;
  return std::exp(-5.0 * gap * gap);
}

std::string Variant::name() const {
  switch (kind) {
    case VariantKind::Upsilon: return "Upsilon";
    case VariantKind::VanillaPL: return "VanillaPL";
    case VariantKind::RPLOnly: return "RPLOnly";
    case VariantKind::SECOnly: return "SECOnly";
    case VariantKind::OpenSetK1: return "OpenSetK1";
    case VariantKind::Strategy: return std::string(to_string(strategy.kind));
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "Upsilon") return Variant::upsilon();
  if (name == "VanillaPL") return Variant::of(VariantKind::VanillaPL);
  if (name == "RPLOnly") return Variant::of(VariantKind::RPLOnly);
  if (name == "SECOnly") return Variant::of(VariantKind::SECOnly);
  if (name == "OpenSetK1") return Variant::of(VariantKind::OpenSetK1);
  return Variant::of(parse_strategy_kind(name));
}

std::size_t variant_k_extra(const Variant& variant, std::size_t configured_k, std::size_t k_ood) {
  switch (variant.kind) {
    case VariantKind::VanillaPL:
    case VariantKind::RPLOnly: return 0;
    case VariantKind::OpenSetK1: return 1;
    case VariantKind::Upsilon:
    case VariantKind::SECOnly: return configured_k;
    case VariantKind::Strategy:
      switch (variant.strategy.kind) {
        case StrategyKind::Baseline:
        case StrategyKind::ReAssigned: return 0;
        case StrategyKind::OpenSet: return 1;
        case StrategyKind::Oracle: return k_ood;
      }
  }
  return configured_k;
}

void check_variant(const Variant& variant, const TrainConfig& cfg) {
  const auto fail = [&](const std::string& why) {
    throw std::invalid_argument("variant " + variant.name() + " " + why + " (k_extra=" + std::to_string(cfg.k_extra) + ")");
  };
  switch (variant.kind) {
    case VariantKind::VanillaPL:
    case VariantKind::RPLOnly:
      if (cfg.k_extra != 0) fail("has no extra classes and needs k_extra = 0");
      break;
    case VariantKind::OpenSetK1:
      if (cfg.k_extra != 1) fail("labels all unconfident samples as one class and needs k_extra = 1");
      break;
    case VariantKind::Upsilon:
    case VariantKind::SECOnly:
      if (cfg.k_extra == 0) fail("clusters onto extra classes and needs k_extra >= 1");
      break;
    case VariantKind::Strategy:
      if (variant.strategy.kind == StrategyKind::OpenSet && cfg.k_extra < 1) fail("needs k_extra >= 1");
      break;
  }
}

double id_accuracy(const ClassifierParams& params, const Matrix& x, std::span<const std::size_t> y,
                   const LabelSpace& ls) {
  if (x.rows() == 0) return 0.0;
  const auto predicted = predict_id_label(forward(params, x), ls);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += predicted[i] == y[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

namespace {

std::pair<double, double> split_thresholds(const TrainConfig& cfg) {
  if (cfg.confidence == ConfidenceMeasure::MaxProb) return {cfg.tau, cfg.gamma};
  return {*cfg.alt_high_threshold, *cfg.alt_low_threshold};
}

void fill_round_stats(RoundLog& log, const PseudoLabelSet& labels, const MismatchedDataset& ds, const LabelSpace& ls) {
  log.n_rpl = 0;
  log.n_sec = 0;
  for (const auto& e : labels.entries()) ++(ls.is_id(e.cls) ? log.n_rpl : log.n_sec);
  log.ood_as_id_prop = ood_as_id_proportion(labels, ds.unlabeled_ood, ls);
  const auto hist = LabelHistogram::of_id_labels(labels, ls);
  log.kl_imbalance = hist.total() > 0 ? std::optional<double>(kl_to_uniform(hist)) : std::nullopt;
}

}  // namespace

RoundOutput pseudo_label_round(const ClassifierParams& params, const MismatchedDataset& ds, const LabelSpace& ls,
                               const TrainConfig& cfg, const Variant& variant) {
  RoundOutput out;
  out.labels = PseudoLabelSet(ls.total());
  if (variant.kind == VariantKind::Strategy) {
    out.labels = label_ood(ds.unlabeled_truth, ds.unlabeled_ood, variant.strategy, ls);
    fill_round_stats(out.log, out.labels, ds, ls);
    return out;
  }
  if (ds.unlabeled_x.rows() == 0) {
    fill_round_stats(out.log, out.labels, ds, ls);
    return out;
  }

  const auto probs = forward(params, ds.unlabeled_x);
  const auto conf = compute_confidence(probs, ls, cfg.confidence, cfg.confidence_scope);
  const auto [high, low] = split_thresholds(cfg);

  const bool use_rpl = variant.kind == VariantKind::Upsilon || variant.kind == VariantKind::RPLOnly ||
                       variant.kind == VariantKind::OpenSetK1;
  const bool use_sec = variant.kind == VariantKind::Upsilon || variant.kind == VariantKind::SECOnly ||
                       variant.kind == VariantKind::OpenSetK1;

  if (use_rpl) {
    out.labels = rebalanced_pl(probs, ls, cfg.tau);
    out.log.rpl_quota = out.labels.size() / ls.k_id();
  } else {
    out.labels = vanilla_pl(probs, ls, conf, high);
  }
  if (use_sec) {
    auto clustered = sec(probs, ls, conf, low, cfg.sinkhorn);
    out.log.sec_residual = clustered.residual;
    out.log.sec_iterations = clustered.iterations;
    // Only reachable with non-MaxProb measures; the ID branch keeps the sample.
    for (const auto& e : clustered.labels.entries()) {
      if (!out.labels.contains(e.sample)) out.labels.add(e.sample, e.cls);
    }
  }
  fill_round_stats(out.log, out.labels, ds, ls);
  return out;
}

TrainResult train_variant(const MismatchedDataset& ds, const TrainConfig& cfg, const Variant& variant) {
  cfg.validate();
  check_variant(variant, cfg);
  ds.validate();
  if (ds.labeled_x.rows() == 0) throw std::invalid_argument("training needs labeled samples");

  TrainResult result;
  result.label_space = LabelSpace(ds.k_id, cfg.k_extra);
  const LabelSpace& ls = result.label_space;
  result.params = ClassifierParams::initialized(ds.dim(), cfg.hidden, ls.total(), cfg.seed);
  result.ema = EmaModel(result.params, cfg.ema_decay);
  AdamOptimizer optimizer(result.params.size(), AdamOptions{cfg.learning_rate, 0.9, 0.999, 1e-8});

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t n_labeled = ds.labeled_x.rows();
  const std::size_t m = ds.unlabeled_x.rows();
  const std::size_t batch = cfg.batch_size;
  const std::size_t driver = m > 0 ? m : n_labeled;
  const std::size_t steps_per_epoch = (driver + batch - 1) / batch;
  std::uniform_int_distribution<std::size_t> pick_labeled(0, n_labeled - 1);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  PseudoLabelSet pseudo(ls.total());
  RoundLog current;
  std::uint64_t pl_steps = 0;

  Matrix labeled_batch(batch, ds.dim());
  std::vector<std::size_t> labeled_y(batch);
  std::vector<std::size_t> pseudo_rows;
  std::vector<std::size_t> pseudo_y;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const bool pl_phase = epoch >= cfg.pretrain_epochs && !pseudo.empty();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t idx = pick_labeled(rng);
        const auto src = ds.labeled_x.row(idx);
        std::copy(src.begin(), src.end(), labeled_batch.row(b).begin());
        labeled_y[b] = ds.labeled_y[idx];
      }
      pseudo_rows.clear();
      pseudo_y.clear();
      if (pl_phase) {
        const std::size_t begin = std::min(m, step * batch);
        const std::size_t end = std::min(m, begin + batch);
        for (std::size_t i = begin; i < end; ++i) {
          if (auto label = pseudo.label_of(order[i])) {
            pseudo_rows.push_back(order[i]);
            pseudo_y.push_back(*label);
          }
        }
      }
      double lambda = 1.0;
      if (epoch >= cfg.pretrain_epochs) {
        if (cfg.lambda_ramp_enabled) lambda = lambda_ramp(static_cast<double>(pl_steps), cfg.ramp_horizon);
        ++pl_steps;
      }
      // Pseudo CE is averaged over the whole unlabeled chunk, not just its labeled members.
      if (!pseudo_rows.empty()) lambda *= static_cast<double>(pseudo_rows.size()) / static_cast<double>(batch);
      const Matrix pseudo_x = ds.unlabeled_x.select_rows(pseudo_rows);
      const auto step_result =
          supervised_step(result.params, optimizer, labeled_batch, labeled_y, pseudo_x, pseudo_y, lambda);
      loss_sum += step_result.loss.total;
      result.ema.update(result.params);
    }
    if (!result.params.all_finite()) throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));

    EpochLog log;
    log.epoch = epoch;
    log.accuracy = id_accuracy(result.ema.params(), ds.test_id_x, ds.test_id_y, ls);
    log.loss = loss_sum / static_cast<double>(steps_per_epoch);
    log.n_pseudo_rpl = current.n_rpl;
    log.n_pseudo_sec = current.n_sec;
    log.ood_as_id_prop = current.ood_as_id_prop;
    log.kl_imbalance = current.kl_imbalance;
    result.epochs.push_back(log);

    if (epoch >= cfg.pretrain_epochs && epoch % cfg.pl_interval == 0 && epoch < cfg.epochs) {
      auto round = pseudo_label_round(result.params, ds, ls, cfg, variant);
      round.log.epoch = epoch;
      pseudo = std::move(round.labels);
      current = round.log;
      result.rounds.push_back(round.log);
    }
  }

  const auto tail = static_cast<std::size_t>(
      std::max(1.0, std::round(cfg.eval_tail_fraction * static_cast<double>(result.epochs.size()))));
  double acc = 0.0;
  for (std::size_t i = result.epochs.size() - tail; i < result.epochs.size(); ++i) acc += result.epochs[i].accuracy;
  result.final_accuracy = acc / static_cast<double>(tail);
  return result;
}

TrainResult train_upsilon(const MismatchedDataset& ds, const TrainConfig& cfg) {
  return train_variant(ds, cfg, Variant::upsilon());
}

TrainResult train_labeled_only(const MismatchedDataset& ds, const TrainConfig& cfg) {
  TrainConfig labeled = cfg;
  labeled.epochs = std::max(1, cfg.pretrain_epochs);
  labeled.pretrain_epochs = labeled.epochs - 1;
  labeled.pl_interval = labeled.epochs + 1;
  return train_variant(ds, labeled, Variant::of(StrategyKind::Baseline));
}

void write_metric_log(std::ostream& os, const TrainResult& result) {
  os << "epoch,split,accuracy,loss,n_pseudo_rpl,n_pseudo_sec,ood_as_id_prop,kl_imbalance\n";
  os << std::setprecision(10);
  for (const auto& e : result.epochs) {
    os << e.epoch << ",test," << e.accuracy << ',' << e.loss << ',' << e.n_pseudo_rpl << ',' << e.n_pseudo_sec << ','
       << e.ood_as_id_prop << ',';
    if (e.kl_imbalance) os << *e.kl_imbalance;
    os << '\n';
  }
}

}  // namespace upsilon
