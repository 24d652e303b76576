#pragma once

// Vanilla thresholded pseudo-labeling and Re-balanced Pseudo-Labeling (RPL).

#include <cstddef>
#include <vector>

#include "upsilon/confidence.hpp"
#include "upsilon/label_space.hpp"

namespace upsilon {

// Per-class quota N and per-class cutoffs tau_y (the N-th largest value of
// column y). The cutoffs are undefined when N == 0.
struct RplThresholds {
  std::size_t n = 0;
  std::vector<std::size_t> counts_above_tau;  // |{x : p(y|x) > tau}| per ID class
  std::vector<double> tau_y;                  // empty when !defined()

  bool defined() const { return n > 0; }
};

// Rows whose ID confidence exceeds tau, labeled with their ID argmax.
// Throws std::invalid_argument unless 0 < tau < 1.
PseudoLabelSet vanilla_pl(const PredictionMatrix& p, const LabelSpace& ls, double tau);

// Thresholded variant driven by an arbitrary confidence vector (entropy,
// score difference); rows with conf > threshold get their ID argmax.
PseudoLabelSet vanilla_pl(const PredictionMatrix& p, const LabelSpace& ls, const ConfidenceVector& conf,
                          double threshold);

RplThresholds compute_rpl_thresholds(const PredictionMatrix& p, const LabelSpace& ls, double tau);

// Exactly N samples per ID class: a row is a candidate only for its ID argmax
// class, and within a class candidates are ranked by (probability desc,
// sample index asc). N is the minimum over classes of the candidates above
// tau, which equals the RplThresholds quota whenever tau >= 0.5.
PseudoLabelSet rebalanced_pl(const PredictionMatrix& p, const LabelSpace& ls, double tau);

}  // namespace upsilon
