#include "upsilon/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace upsilon {

namespace {

double neg_entropy(std::span<const double> row) {
  double acc = 0.0;
  for (double v : row) {
    const double q = std::max(v, kEntropyFloor);
    acc += v * std::log(q);
  }
  return acc;
}

double top_two_gap(std::span<const double> row) {
  double first = -1.0;
  double second = -1.0;
  for (double v : row) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

void require_id_columns(const PredictionMatrix& p, const LabelSpace& ls) {
  if (p.rows() > 0 && p.cols() != ls.total()) {
    throw DimensionError("prediction matrix has " + std::to_string(p.cols()) + " columns, label space has " +
                         std::to_string(ls.total()) + " classes");
  }
}

}  // namespace

ConfidenceVector id_confidence(const PredictionMatrix& p, const LabelSpace& ls) {
  require_id_columns(p, ls);
  ConfidenceVector out{std::vector<double>(p.rows()), ConfidenceMeasure::MaxProb};
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto ids = p.row(r).first(ls.k_id());
    out.values[r] = *std::max_element(ids.begin(), ids.end());
  }
  return out;
}

ConfidenceVector entropy_confidence(const PredictionMatrix& p) {
  ConfidenceVector out{std::vector<double>(p.rows()), ConfidenceMeasure::NegEntropy};
  for (std::size_t r = 0; r < p.rows(); ++r) out.values[r] = neg_entropy(p.row(r));
  return out;
}

ConfidenceVector score_diff_confidence(const PredictionMatrix& p) {
  if (p.cols() < 2) throw DimensionError("score difference needs at least two columns");
  ConfidenceVector out{std::vector<double>(p.rows()), ConfidenceMeasure::ScoreDiff};
  for (std::size_t r = 0; r < p.rows(); ++r) out.values[r] = top_two_gap(p.row(r));
  return out;
}

ConfidenceVector compute_confidence(const PredictionMatrix& p, const LabelSpace& ls, ConfidenceMeasure measure,
                                    ConfidenceScope scope) {
  if (measure == ConfidenceMeasure::MaxProb) return id_confidence(p, ls);
  require_id_columns(p, ls);
  const bool id_only = scope == ConfidenceScope::IdColumns;
  ConfidenceVector out{std::vector<double>(p.rows()), measure};
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto row = id_only ? p.row(r).first(ls.k_id()) : p.row(r);
    out.values[r] = measure == ConfidenceMeasure::NegEntropy ? neg_entropy(row) : top_two_gap(row);
  }
  return out;
}

ConfidenceMeasure parse_confidence_measure(std::string_view name) {
  if (name == "maxprob" || name == "MaxProb") return ConfidenceMeasure::MaxProb;
  if (name == "entropy" || name == "NegEntropy") return ConfidenceMeasure::NegEntropy;
  if (name == "scorediff" || name == "ScoreDiff") return ConfidenceMeasure::ScoreDiff;
  throw std::invalid_argument("unknown confidence measure '" + std::string(name) + "'");
}

std::string_view to_string(ConfidenceMeasure measure) {
  switch (measure) {
    case ConfidenceMeasure::MaxProb: return "maxprob";
    case ConfidenceMeasure::NegEntropy: return "entropy";
    case ConfidenceMeasure::ScoreDiff: return "scorediff";
  }
  return "?";
}

}  // namespace upsilon
