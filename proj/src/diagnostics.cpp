#include "upsilon/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <string>

#include "upsilon/datagen.hpp"
#include "upsilon/pseudo_labeling.hpp"
#include "upsilon/trainer.hpp"
#include "upsilon/worker_pool.hpp"

namespace upsilon {

LabelHistogram::LabelHistogram(std::vector<std::size_t> counts)
    : counts_(std::move(counts)), total_(std::accumulate(counts_.begin(), counts_.end(), std::size_t{0})) {}

LabelHistogram LabelHistogram::of_id_labels(const PseudoLabelSet& labels, const LabelSpace& ls) {
  std::vector<std::size_t> counts(ls.k_id(), 0);
  for (const auto& e : labels.entries()) {
    if (ls.is_id(e.cls)) ++counts[e.cls];
  }
  return LabelHistogram(std::move(counts));
}

LabelHistogram LabelHistogram::of_labels(std::span<const std::size_t> labels, std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (auto y : labels) {
    if (y >= n_classes) throw std::out_of_range("label " + std::to_string(y) + " outside histogram");
    ++counts[y];
  }
  return LabelHistogram(std::move(counts));
}

double kl_to_uniform(const LabelHistogram& h) {
  if (h.total() == 0) throw EmptyHistogramError("KL of an empty histogram");
  const double n = static_cast<double>(h.total());
  const double u = 1.0 / static_cast<double>(h.classes());
  double kl = 0.0;
  for (auto c : h.counts()) {
    if (c == 0) continue;
    const double q = static_cast<double>(c) / n;
    kl += q * std::log(q / u);
  }
  return std::max(kl, 0.0);
}

ImbalanceRatio majority_minority_ratio(const LabelHistogram& h) {
  if (h.total() == 0) throw EmptyHistogramError("ratio of an empty histogram");
  const auto [lo, hi] = std::minmax_element(h.counts().begin(), h.counts().end());
  if (*lo == 0) return {std::numeric_limits<double>::infinity(), true};
  return {static_cast<double>(*hi) / static_cast<double>(*lo), false};
}

std::size_t ConfusionMatrix::row_sum(std::size_t t) const {
  return std::accumulate(counts_.begin() + static_cast<std::ptrdiff_t>(t * cols_),
                         counts_.begin() + static_cast<std::ptrdiff_t>((t + 1) * cols_), std::size_t{0});
}

ConfusionMatrix confusion(std::span<const std::size_t> true_labels, std::span<const std::size_t> predicted_id_labels,
                          const LabelSpace& ls, std::size_t true_classes) {
  if (true_labels.size() != predicted_id_labels.size()) throw DimensionError("confusion: label vectors differ in length");
  if (true_classes == 0) {
    true_classes = ls.k_id();
    for (auto t : true_labels) true_classes = std::max(true_classes, t + 1);
  }
  ConfusionMatrix cm(true_classes, ls.k_id());
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    if (true_labels[i] >= true_classes) throw std::out_of_range("confusion: true label out of range");
    if (predicted_id_labels[i] >= ls.k_id()) throw std::out_of_range("confusion: predicted label is not an ID class");
    ++cm.at(true_labels[i], predicted_id_labels[i]);
  }
  return cm;
}

double ood_as_id_proportion(const PseudoLabelSet& labels, const std::vector<bool>& ood_mask, const LabelSpace& ls) {
  const auto n_ood = static_cast<std::size_t>(std::count(ood_mask.begin(), ood_mask.end(), true));
  if (n_ood == 0) return 0.0;
  std::size_t hits = 0;
  for (const auto& e : labels.entries()) {
    if (e.sample < ood_mask.size() && ood_mask[e.sample] && ls.is_id(e.cls)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n_ood);
}

std::vector<ImbalanceTrial> imbalance_study(const BenchmarkSpec& spec, const TrainConfig& cfg, std::size_t trials,
                                            std::uint64_t seed, std::size_t workers) {
  if (trials == 0) throw std::invalid_argument("imbalance study needs at least one trial");
  std::vector<ImbalanceTrial> out(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    BenchmarkSpec trial_spec = spec;
    trial_spec.seed = seed + t;
    const auto ds = generate(trial_spec);
    TrainConfig trial_cfg = cfg;
    trial_cfg.seed = seed + t;
    trial_cfg.k_extra = 0;
    const auto trained = train_labeled_only(ds, trial_cfg);
    const LabelSpace& ls = trained.label_space;
    const auto labels = vanilla_pl(forward(trained.params, ds.unlabeled_x), ls, cfg.tau);

    std::vector<std::size_t> id_counts(ls.k_id(), 0);
    std::vector<std::size_t> ood_counts(ls.k_id(), 0);
    for (const auto& e : labels.entries()) ++(ds.unlabeled_ood[e.sample] ? ood_counts : id_counts)[e.cls];

    ImbalanceTrial trial;
    trial.trial = t;
    const LabelHistogram id_hist(id_counts);
    if (id_hist.total() == 0) throw std::runtime_error("imbalance trial " + std::to_string(t) + ": no ID pseudo-labels");
    trial.kl_id = kl_to_uniform(id_hist);
    trial.r_id = majority_minority_ratio(id_hist);
    const LabelHistogram ood_hist(ood_counts);
    if (ood_hist.total() > 0) {
      trial.kl_ood = kl_to_uniform(ood_hist);
      trial.r_ood = majority_minority_ratio(ood_hist);
    }
    out[t] = trial;
  });
  return out;
}

namespace {

void write_ratio(std::ostream& os, const ImbalanceRatio& r) {
  if (r.unbounded) os << "inf";
  else os << r.value;
}

}  // namespace

void write_imbalance_csv(std::ostream& os, std::span<const ImbalanceTrial> trials) {
  os << "trial,kl_id,kl_ood,r_id,r_ood\n";
  os << std::setprecision(10);
  for (const auto& t : trials) {
    os << t.trial << ',' << t.kl_id << ',';
    if (t.kl_ood) os << *t.kl_ood;
    os << ',';
    write_ratio(os, t.r_id);
    os << ',';
    if (t.r_ood) write_ratio(os, *t.r_ood);
    os << '\n';
  }
}

}  // namespace upsilon
