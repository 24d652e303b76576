#pragma once

// One-hidden-layer ReLU network (or linear softmax regression when hidden == 0)
// with analytic gradients, Adam, and an EMA shadow for evaluation.

#include <cstdint>
#include <span>
#include <vector>

#include "upsilon/label_space.hpp"
#include "upsilon/matrix.hpp"

namespace upsilon {

// All weights live in one flat buffer so the optimizer and EMA run as single
// kernel calls. Layout: [W1 (d x h), b1 (h), W2 (h x out), b2 (out)], with
// the hidden block absent when h == 0 (then W2 is d x out).
class ClassifierParams {
 public:
  ClassifierParams() = default;
  ClassifierParams(std::size_t input_dim, std::size_t hidden, std::size_t outputs);

  // Glorot-uniform weights, zero biases.
  static ClassifierParams initialized(std::size_t input_dim, std::size_t hidden, std::size_t outputs,
                                      std::uint64_t seed);

  std::size_t input_dim() const { return d_; }
  std::size_t hidden() const { return h_; }
  std::size_t outputs() const { return out_; }
  std::size_t size() const { return flat_.size(); }

  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }

  // Offsets into flat().
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return d_ * h_; }
  std::size_t w2_offset() const { return d_ * h_ + h_; }
  std::size_t b2_offset() const { return w2_offset() + (h_ > 0 ? h_ : d_) * out_; }

  bool all_finite() const;

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;

 private:
  std::size_t d_ = 0;
  std::size_t h_ = 0;
  std::size_t out_ = 0;
  std::vector<double> flat_;
};

// Pre-softmax scores, one row per sample.
Matrix logits(const ClassifierParams& params, const Matrix& features);

// Row-wise softmax of the logits.
PredictionMatrix forward(const ClassifierParams& params, const Matrix& features);

struct LossTerms {
  double total = 0.0;
  double labeled = 0.0;  // mean CE over the labeled batch
  double pseudo = 0.0;   // mean CE over the pseudo-labeled batch (0 if empty)
};

// total = CE(labeled) + lambda * CE(pseudo); grad receives d(total)/d(params)
// and must have params.size() entries.
LossTerms loss_and_gradient(const ClassifierParams& params, const Matrix& labeled_x,
                            std::span<const std::size_t> labeled_y, const Matrix& pseudo_x,
                            std::span<const std::size_t> pseudo_y, double lambda, std::span<double> grad);

LossTerms loss_only(const ClassifierParams& params, const Matrix& labeled_x, std::span<const std::size_t> labeled_y,
                    const Matrix& pseudo_x, std::span<const std::size_t> pseudo_y, double lambda);

struct AdamOptions {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n_params, AdamOptions options);
  void step(ClassifierParams& params, std::span<const double> grad);
  std::uint64_t steps() const { return t_; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

// shadow <- decay * shadow + (1 - decay) * current
class EmaModel {
 public:
  EmaModel() = default;
  EmaModel(ClassifierParams initial, double decay);

  void update(const ClassifierParams& current);
  const ClassifierParams& params() const { return shadow_; }
  double decay() const { return decay_; }

 private:
  ClassifierParams shadow_;
  double decay_ = 0.999;
};

struct StepResult {
  LossTerms loss;
};

// One Adam update on CE(labeled) + lambda * CE(pseudo).
StepResult supervised_step(ClassifierParams& params, AdamOptimizer& optimizer, const Matrix& labeled_x,
                           std::span<const std::size_t> labeled_y, const Matrix& pseudo_x,
                           std::span<const std::size_t> pseudo_y, double lambda);

}  // namespace upsilon
