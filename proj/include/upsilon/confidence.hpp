#pragma once

#include <string_view>
#include <vector>

#include "upsilon/label_space.hpp"

namespace upsilon {

enum class ConfidenceMeasure { MaxProb, NegEntropy, ScoreDiff };

// Which columns the entropy and score-difference measures read. MaxProb is
// always restricted to the ID columns.
enum class ConfidenceScope { AllColumns, IdColumns };

struct ConfidenceVector {
  std::vector<double> values;
  ConfidenceMeasure measure = ConfidenceMeasure::MaxProb;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

inline constexpr double kEntropyFloor = 1e-12;

// Max probability over the ID columns (the "ID confidence").
ConfidenceVector id_confidence(const PredictionMatrix& p, const LabelSpace& ls);

// sum_y p_y log p_y with p_y floored at 1e-12; 0 for one-hot rows.
ConfidenceVector entropy_confidence(const PredictionMatrix& p);

// Largest minus second-largest probability. Needs at least two columns.
ConfidenceVector score_diff_confidence(const PredictionMatrix& p);

ConfidenceVector compute_confidence(const PredictionMatrix& p, const LabelSpace& ls, ConfidenceMeasure measure,
                                    ConfidenceScope scope = ConfidenceScope::AllColumns);

ConfidenceMeasure parse_confidence_measure(std::string_view name);
std::string_view to_string(ConfidenceMeasure measure);

}  // namespace upsilon
