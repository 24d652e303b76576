#pragma once

// Class-space and prediction containers shared by every module.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upsilon/matrix.hpp"

namespace upsilon {

inline constexpr double kRowSumTolerance = 1e-6;

// K_ID in-distribution classes followed by K extra classes. ID classes occupy
// indices [0, k_id), extra classes [k_id, k_id + k_extra).
class LabelSpace {
 public:
  LabelSpace(std::size_t k_id, std::size_t k_extra);

  std::size_t k_id() const { return k_id_; }
  std::size_t k_extra() const { return k_extra_; }
  std::size_t total() const { return k_id_ + k_extra_; }

  bool is_id(std::size_t cls) const { return cls < k_id_; }
  bool is_extra(std::size_t cls) const { return cls >= k_id_ && cls < total(); }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  std::size_t k_id_;
  std::size_t k_extra_;
};

struct PredictionViolation {
  enum class Kind { RowSum, Negative, NonFinite };
  Kind kind;
  std::size_t row;
  std::size_t col;  // offending column for Negative/NonFinite
  double value;     // row sum or offending entry

  std::string describe() const;
};

// nullopt when every row is a probability vector; otherwise the first
// violating row (row-major scan order).
std::optional<PredictionViolation> validate_prediction_matrix(const Matrix& p);

// Row-stochastic matrix of posteriors, validated on construction.
class PredictionMatrix {
 public:
  PredictionMatrix() = default;
  explicit PredictionMatrix(Matrix probs);

  std::size_t rows() const { return probs_.rows(); }
  std::size_t cols() const { return probs_.cols(); }
  double operator()(std::size_t r, std::size_t c) const { return probs_(r, c); }
  std::span<const double> row(std::size_t r) const { return probs_.row(r); }
  const Matrix& matrix() const { return probs_; }

  PredictionMatrix select_rows(std::span<const std::size_t> indices) const;

 private:
  Matrix probs_;
};

// Features for M samples plus their stable sample ids.
class SampleBatch {
 public:
  SampleBatch() = default;
  SampleBatch(Matrix features, std::vector<std::size_t> ids);

  std::size_t size() const { return features_.rows(); }
  std::size_t dim() const { return features_.cols(); }
  const Matrix& features() const { return features_; }
  const std::vector<std::size_t>& ids() const { return ids_; }

 private:
  Matrix features_;
  std::vector<std::size_t> ids_;
};

struct PseudoLabel {
  std::size_t sample;
  std::size_t cls;
  friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

// Sparse (sample, class) assignments; a sample appears at most once.
class PseudoLabelSet {
 public:
  PseudoLabelSet() = default;
  explicit PseudoLabelSet(std::size_t total_classes) : total_classes_(total_classes) {}

  void add(std::size_t sample, std::size_t cls);
  // Union of two sets over disjoint samples.
  void merge(const PseudoLabelSet& other);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(std::size_t sample) const;
  std::optional<std::size_t> label_of(std::size_t sample) const;
  std::size_t total_classes() const { return total_classes_; }
  const std::vector<PseudoLabel>& entries() const { return entries_; }

  // Entries ordered by sample index.
  std::vector<PseudoLabel> sorted() const;

  // Per-class counts over [0, total_classes).
  std::vector<std::size_t> class_counts() const;

 private:
  std::size_t total_classes_ = 0;
  std::vector<PseudoLabel> entries_;
  std::vector<std::size_t> sample_slots_;  // sample -> entry index + 1, grown on demand
};

// Argmax over the first k_id columns; ties go to the lowest index.
std::vector<std::size_t> predict_id_label(const PredictionMatrix& p, const LabelSpace& ls);

// Lowest-index argmax over a span.
std::size_t argmax(std::span<const double> values);

}  // namespace upsilon
