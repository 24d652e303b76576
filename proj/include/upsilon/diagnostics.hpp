#pragma once

// Imbalance and contamination metrics for pseudo-label sets.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "upsilon/label_space.hpp"

namespace upsilon {

struct BenchmarkSpec;
struct TrainConfig;

class EmptyHistogramError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LabelHistogram {
 public:
  explicit LabelHistogram(std::vector<std::size_t> counts);

  // Histogram of the ID-class labels in a pseudo-label set.
  static LabelHistogram of_id_labels(const PseudoLabelSet& labels, const LabelSpace& ls);
  static LabelHistogram of_labels(std::span<const std::size_t> labels, std::size_t n_classes);

  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t total() const { return total_; }
  std::size_t classes() const { return counts_.size(); }

 private:
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

// KL(q || uniform) with natural log and 0 log 0 = 0.
double kl_to_uniform(const LabelHistogram& h);

struct ImbalanceRatio {
  double value = 1.0;      // max_i q_i / min_i q_i when bounded
  bool unbounded = false;  // some class has zero count
};

ImbalanceRatio majority_minority_ratio(const LabelHistogram& h);

// Rows are true classes (ID then OOD), columns predicted ID classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::size_t true_classes, std::size_t predicted_classes)
      : rows_(true_classes), cols_(predicted_classes), counts_(true_classes * predicted_classes, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t operator()(std::size_t t, std::size_t p) const { return counts_[t * cols_ + p]; }
  std::size_t& at(std::size_t t, std::size_t p) { return counts_[t * cols_ + p]; }
  std::size_t row_sum(std::size_t t) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::size_t> counts_;
};

// true_classes defaults to 1 + the largest true label (at least k_id).
ConfusionMatrix confusion(std::span<const std::size_t> true_labels, std::span<const std::size_t> predicted_id_labels,
                          const LabelSpace& ls, std::size_t true_classes = 0);

// (# OOD samples with an ID pseudo-label) / (# OOD samples); 0 with no OOD.
double ood_as_id_proportion(const PseudoLabelSet& labels, const std::vector<bool>& ood_mask, const LabelSpace& ls);

struct ImbalanceTrial {
  std::size_t trial = 0;
  double kl_id = 0.0;
  std::optional<double> kl_ood;  // absent when the pool has no OOD pseudo-labels
  ImbalanceRatio r_id;
  std::optional<ImbalanceRatio> r_ood;
};

// Per trial: a fresh benchmark (seed + trial), a labeled-only model, then
// pseudo-labels (ID confidence > tau, ID argmax) on the ID and OOD parts of
// the unlabeled pool, each summarized by KL-to-uniform and the ratio.
std::vector<ImbalanceTrial> imbalance_study(const BenchmarkSpec& spec, const TrainConfig& cfg, std::size_t trials,
                                            std::uint64_t seed, std::size_t workers = 1);

// CSV: trial,kl_id,kl_ood,r_id,r_ood (empty = absent, "inf" = unbounded ratio)
void write_imbalance_csv(std::ostream& os, std::span<const ImbalanceTrial> trials);

}  // namespace upsilon
