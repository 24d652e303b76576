#include "upsilon/pseudo_labeling.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace upsilon {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1), got " + std::to_string(tau));
}

void check_columns(const PredictionMatrix& p, const LabelSpace& ls) {
  if (p.rows() > 0 && p.cols() != ls.total()) {
    throw DimensionError("prediction matrix has " + std::to_string(p.cols()) + " columns, label space has " +
                         std::to_string(ls.total()));
  }
}

}  // namespace

PseudoLabelSet vanilla_pl(const PredictionMatrix& p, const LabelSpace& ls, double tau) {
  check_tau(tau);
  return vanilla_pl(p, ls, id_confidence(p, ls), tau);
}

PseudoLabelSet vanilla_pl(const PredictionMatrix& p, const LabelSpace& ls, const ConfidenceVector& conf,
                          double threshold) {
  check_columns(p, ls);
  if (conf.size() != p.rows()) throw DimensionError("confidence vector length differs from prediction rows");
  PseudoLabelSet out(ls.total());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    if (conf[r] > threshold) out.add(r, argmax(p.row(r).first(ls.k_id())));
  }
  return out;
}

RplThresholds compute_rpl_thresholds(const PredictionMatrix& p, const LabelSpace& ls, double tau) {
  check_columns(p, ls);
  RplThresholds out;
  out.counts_above_tau.assign(ls.k_id(), 0);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t y = 0; y < ls.k_id(); ++y) {
      if (p(r, y) > tau) ++out.counts_above_tau[y];
    }
  }
  out.n = *std::min_element(out.counts_above_tau.begin(), out.counts_above_tau.end());
  if (out.n == 0) return out;

  out.tau_y.resize(ls.k_id());
  std::vector<double> column(p.rows());
  for (std::size_t y = 0; y < ls.k_id(); ++y) {
    for (std::size_t r = 0; r < p.rows(); ++r) column[r] = p(r, y);
    auto nth = column.begin() + static_cast<std::ptrdiff_t>(out.n - 1);
    std::nth_element(column.begin(), nth, column.end(), std::greater<>());
    out.tau_y[y] = *nth;
  }
  return out;
}

PseudoLabelSet rebalanced_pl(const PredictionMatrix& p, const LabelSpace& ls, double tau) {
  check_columns(p, ls);
  std::vector<std::vector<std::size_t>> candidates(ls.k_id());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    candidates[argmax(p.row(r).first(ls.k_id()))].push_back(r);
  }

  std::size_t quota = p.rows();
  for (std::size_t y = 0; y < ls.k_id(); ++y) {
    const auto above = std::count_if(candidates[y].begin(), candidates[y].end(),
                                     [&](std::size_t r) { return p(r, y) > tau; });
    quota = std::min(quota, static_cast<std::size_t>(above));
  }

  PseudoLabelSet out(ls.total());
  if (quota == 0) return out;
  for (std::size_t y = 0; y < ls.k_id(); ++y) {
    auto& rows = candidates[y];
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return p(a, y) > p(b, y); });
    for (std::size_t i = 0; i < quota; ++i) out.add(rows[i], y);
  }
  return out;
}

}  // namespace upsilon
