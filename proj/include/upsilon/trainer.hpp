#pragma once

// Training loop of the Upsilon-Model: labeled-only pretraining, then periodic
// pseudo-labeling rounds (RPL on confident samples, SEC on unconfident ones)
// with supervised updates on the labeled set plus the pseudo-labeled set.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "upsilon/classifier.hpp"
#include "upsilon/confidence.hpp"
#include "upsilon/datagen.hpp"
#include "upsilon/sec_clustering.hpp"
#include "upsilon/strategies.hpp"

namespace upsilon {

struct TrainConfig {
  double tau = 0.95;
  double gamma = 0.3;
  std::size_t k_extra = 4;
  int epochs = 400;
  int pretrain_epochs = 50;
  int pl_interval = 2;
  double learning_rate = 3e-3;
  std::size_t batch_size = 128;
  double ema_decay = 0.999;
  bool lambda_ramp_enabled = false;
  double ramp_horizon = 40000.0;
  std::size_t hidden = 32;
  ConfidenceMeasure confidence = ConfidenceMeasure::MaxProb;
  ConfidenceScope confidence_scope = ConfidenceScope::AllColumns;
  // Thresholds used in place of tau/gamma for the vanilla-PL and SEC splits
  // when the confidence measure is not MaxProb.
  std::optional<double> alt_high_threshold;
  std::optional<double> alt_low_threshold;
  SinkhornConfig sinkhorn;
  // Fraction of final epochs whose test accuracy is averaged.
  double eval_tail_fraction = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

// exp(-5 * (1 - min(iter / horizon, 1))^2)
double lambda_ramp(double iter, double horizon);

enum class VariantKind { Upsilon, VanillaPL, RPLOnly, SECOnly, OpenSetK1, Strategy };

struct Variant {
  VariantKind kind = VariantKind::Upsilon;
  Strategy strategy;  // VariantKind::Strategy only

  static Variant upsilon() { return {VariantKind::Upsilon, {}}; }
  static Variant of(VariantKind kind) { return {kind, {}}; }
  static Variant of(StrategyKind kind) { return {VariantKind::Strategy, {kind, {}}}; }

  std::string name() const;
};

Variant parse_variant(std::string_view name);

// The k_extra a variant runs with: 0 for VanillaPL/RPLOnly, 1 for OpenSetK1,
// the configured K for Upsilon/SECOnly, and for strategies 0 (Baseline,
// ReAssigned), 1 (OpenSet) or k_ood (Oracle).
std::size_t variant_k_extra(const Variant& variant, std::size_t configured_k, std::size_t k_ood);

// Throws std::invalid_argument when cfg.k_extra contradicts the variant.
void check_variant(const Variant& variant, const TrainConfig& cfg);

struct RoundLog {
  int epoch = 0;
  std::size_t n_rpl = 0;  // ID-class pseudo-labels
  std::size_t n_sec = 0;  // extra-class pseudo-labels
  std::size_t rpl_quota = 0;
  double ood_as_id_prop = 0.0;
  std::optional<double> kl_imbalance;  // KL of the ID pseudo-label histogram
  double sec_residual = 0.0;
  int sec_iterations = 0;
};

struct EpochLog {
  int epoch = 0;
  double accuracy = 0.0;  // EMA model, ID test split, ID-restricted argmax
  double loss = 0.0;      // mean training loss over the epoch
  std::size_t n_pseudo_rpl = 0;
  std::size_t n_pseudo_sec = 0;
  double ood_as_id_prop = 0.0;
  std::optional<double> kl_imbalance;
};

struct TrainResult {
  LabelSpace label_space{2, 0};
  ClassifierParams params;
  EmaModel ema;
  std::vector<EpochLog> epochs;
  std::vector<RoundLog> rounds;
  double final_accuracy = 0.0;
};

struct RoundOutput {
  PseudoLabelSet labels;
  RoundLog log;
};

// One pseudo-labeling round of the variant on the unlabeled pool using params.
RoundOutput pseudo_label_round(const ClassifierParams& params, const MismatchedDataset& ds, const LabelSpace& ls,
                               const TrainConfig& cfg, const Variant& variant);

TrainResult train_variant(const MismatchedDataset& ds, const TrainConfig& cfg, const Variant& variant);

// The full RPL + SEC model.
TrainResult train_upsilon(const MismatchedDataset& ds, const TrainConfig& cfg);

// Labeled-only training for cfg.pretrain_epochs epochs (imbalance analysis).
TrainResult train_labeled_only(const MismatchedDataset& ds, const TrainConfig& cfg);

double id_accuracy(const ClassifierParams& params, const Matrix& x, std::span<const std::size_t> y,
                   const LabelSpace& ls);

// CSV: epoch,split,accuracy,loss,n_pseudo_rpl,n_pseudo_sec,ood_as_id_prop,kl_imbalance
void write_metric_log(std::ostream& os, const TrainResult& result);

}  // namespace upsilon
