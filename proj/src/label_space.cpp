#include "upsilon/label_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace upsilon {

LabelSpace::LabelSpace(std::size_t k_id, std::size_t k_extra) : k_id_(k_id), k_extra_(k_extra) {
  if (k_id_ < 2) throw std::invalid_argument("label space needs at least 2 ID classes");
}

std::string PredictionViolation::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::RowSum:
      os << "row " << row << " sums to " << value << " (expected 1)";
      break;
    case Kind::Negative:
      os << "row " << row << " has negative entry " << value << " at column " << col;
      break;
    case Kind::NonFinite:
      os << "row " << row << " has non-finite entry at column " << col;
      break;
  }
  return os.str();
}

std::optional<PredictionViolation> validate_prediction_matrix(const Matrix& p) {
  using Kind = PredictionViolation::Kind;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double total = 0.0;
    const auto row = p.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!std::isfinite(row[c])) return PredictionViolation{Kind::NonFinite, r, c, row[c]};
      if (row[c] < 0.0) return PredictionViolation{Kind::Negative, r, c, row[c]};
      total += row[c];
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) return PredictionViolation{Kind::RowSum, r, 0, total};
  }
  return std::nullopt;
}

PredictionMatrix::PredictionMatrix(Matrix probs) : probs_(std::move(probs)) {
  if (auto violation = validate_prediction_matrix(probs_)) {
    throw std::invalid_argument("not a prediction matrix: " + violation->describe());
  }
}

PredictionMatrix PredictionMatrix::select_rows(std::span<const std::size_t> indices) const {
  PredictionMatrix out;
  out.probs_ = probs_.select_rows(indices);
  return out;
}

SampleBatch::SampleBatch(Matrix features, std::vector<std::size_t> ids)
    : features_(std::move(features)), ids_(std::move(ids)) {
  if (ids_.size() != features_.rows()) throw DimensionError("sample batch: ids/features size mismatch");
  std::unordered_set<std::size_t> seen;
  for (auto id : ids_) {
    if (!seen.insert(id).second) throw std::invalid_argument("sample batch: duplicate id " + std::to_string(id));
  }
}

void PseudoLabelSet::add(std::size_t sample, std::size_t cls) {
  if (cls >= total_classes_) {
    throw std::out_of_range("pseudo-label class " + std::to_string(cls) + " outside label space of " +
                            std::to_string(total_classes_));
  }
  if (sample >= sample_slots_.size()) sample_slots_.resize(sample + 1, 0);
  if (sample_slots_[sample] != 0) {
    throw std::invalid_argument("sample " + std::to_string(sample) + " already pseudo-labeled");
  }
  entries_.push_back({sample, cls});
  sample_slots_[sample] = entries_.size();
}

void PseudoLabelSet::merge(const PseudoLabelSet& other) {
  if (other.total_classes_ > total_classes_) total_classes_ = other.total_classes_;
  for (const auto& e : other.entries_) add(e.sample, e.cls);
}

bool PseudoLabelSet::contains(std::size_t sample) const {
  return sample < sample_slots_.size() && sample_slots_[sample] != 0;
}

std::optional<std::size_t> PseudoLabelSet::label_of(std::size_t sample) const {
  if (!contains(sample)) return std::nullopt;
  return entries_[sample_slots_[sample] - 1].cls;
}

std::vector<PseudoLabel> PseudoLabelSet::sorted() const {
  auto out = entries_;
  std::sort(out.begin(), out.end(), [](const PseudoLabel& a, const PseudoLabel& b) { return a.sample < b.sample; });
  return out;
}

std::vector<std::size_t> PseudoLabelSet::class_counts() const {
  std::vector<std::size_t> counts(total_classes_, 0);
  for (const auto& e : entries_) ++counts[e.cls];
  return counts;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> predict_id_label(const PredictionMatrix& p, const LabelSpace& ls) {
  if (p.rows() > 0 && p.cols() < ls.k_id()) {
    throw DimensionError("prediction matrix has " + std::to_string(p.cols()) + " columns, label space needs " +
                         std::to_string(ls.k_id()) + " ID columns");
  }
  std::vector<std::size_t> labels(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) labels[r] = argmax(p.row(r).first(ls.k_id()));
  return labels;
}

}  // namespace upsilon
