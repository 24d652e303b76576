#include "upsilon/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "upsilon/kernels.hpp"

namespace upsilon {

ClassifierParams::ClassifierParams(std::size_t input_dim, std::size_t hidden, std::size_t outputs)
    : d_(input_dim), h_(hidden), out_(outputs) {
  if (d_ == 0 || out_ == 0) throw std::invalid_argument("classifier needs input_dim >= 1 and outputs >= 1");
  flat_.assign(b2_offset() + out_, 0.0);
}

ClassifierParams ClassifierParams::initialized(std::size_t input_dim, std::size_t hidden, std::size_t outputs,
                                               std::uint64_t seed) {
  ClassifierParams p(input_dim, hidden, outputs);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) p.flat_[offset + i] = u(rng);
  };
  if (hidden > 0) {
    fill(p.w1_offset(), input_dim, hidden);
    fill(p.w2_offset(), hidden, outputs);
  } else {
    fill(p.w2_offset(), input_dim, outputs);
  }
  return p;
}

bool ClassifierParams::all_finite() const {
  return std::all_of(flat_.begin(), flat_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

// Per-sample forward pass keeping the hidden pre-activations for backprop.
struct Workspace {
  std::vector<double> pre;     // hidden pre-activation
  std::vector<double> act;     // hidden activation
  std::vector<double> z;       // logits
  std::vector<double> dz;
  std::vector<double> da;

  explicit Workspace(const ClassifierParams& p)
      : pre(p.hidden()), act(p.hidden()), z(p.outputs()), dz(p.outputs()), da(p.hidden()) {}
};

void forward_one(const ClassifierParams& p, std::span<const double> x, Workspace& ws) {
  const auto& kern = kernels::active();
  const double* w = p.flat().data();
  const std::size_t h = p.hidden();
  const std::size_t out = p.outputs();
  std::span<const double> feed = x;
  if (h > 0) {
    std::copy_n(w + p.b1_offset(), h, ws.pre.begin());
    for (std::size_t k = 0; k < x.size(); ++k) kern.axpy(x[k], w + p.w1_offset() + k * h, ws.pre.data(), h);
    for (std::size_t j = 0; j < h; ++j) ws.act[j] = ws.pre[j] > 0.0 ? ws.pre[j] : 0.0;
    feed = ws.act;
  }
  std::copy_n(w + p.b2_offset(), out, ws.z.begin());
  for (std::size_t j = 0; j < feed.size(); ++j) {
    if (feed[j] != 0.0) kern.axpy(feed[j], w + p.w2_offset() + j * out, ws.z.data(), out);
  }
}

// Softmax of ws.z written into probs; returns log-sum-exp.
double softmax(std::span<const double> z, std::span<double> probs) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    probs[c] = std::exp(z[c] - zmax);
    total += probs[c];
  }
  for (auto& v : probs) v /= total;
  return zmax + std::log(total);
}

void check_batch(const ClassifierParams& p, const Matrix& x, std::span<const std::size_t> y, const char* what) {
  if (x.rows() != y.size()) throw DimensionError(std::string(what) + " batch: features/labels size mismatch");
  if (x.rows() > 0 && x.cols() != p.input_dim()) {
    throw DimensionError(std::string(what) + " batch has " + std::to_string(x.cols()) + " features, model expects " +
                         std::to_string(p.input_dim()));
  }
  for (auto label : y) {
    if (label >= p.outputs()) throw std::out_of_range(std::string(what) + " label " + std::to_string(label) + " out of range");
  }
}

// Accumulates weight * CE over the batch; grad may be empty for loss-only.
double accumulate(const ClassifierParams& p, const Matrix& x, std::span<const std::size_t> y, double weight,
                  Workspace& ws, std::span<double> grad) {
  const auto& kern = kernels::active();
  const double* w = p.flat().data();
  const std::size_t h = p.hidden();
  const std::size_t out = p.outputs();
  double loss = 0.0;
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const auto xn = x.row(n);
    forward_one(p, xn, ws);
    const double lse = softmax(ws.z, ws.dz);
    loss += lse - ws.z[y[n]];
    if (grad.empty()) continue;

    ws.dz[y[n]] -= 1.0;
    kern.scale(weight, ws.dz.data(), out);
    double* g = grad.data();
    kern.axpy(1.0, ws.dz.data(), g + p.b2_offset(), out);
    if (h == 0) {
      for (std::size_t k = 0; k < xn.size(); ++k) kern.axpy(xn[k], ws.dz.data(), g + p.w2_offset() + k * out, out);
      continue;
    }
    for (std::size_t j = 0; j < h; ++j) {
      if (ws.act[j] != 0.0) kern.axpy(ws.act[j], ws.dz.data(), g + p.w2_offset() + j * out, out);
      ws.da[j] = ws.pre[j] > 0.0 ? kern.dot(w + p.w2_offset() + j * out, ws.dz.data(), out) : 0.0;
    }
    kern.axpy(1.0, ws.da.data(), g + p.b1_offset(), h);
    for (std::size_t k = 0; k < xn.size(); ++k) kern.axpy(xn[k], ws.da.data(), g + p.w1_offset() + k * h, h);
  }
  return loss;
}

LossTerms evaluate(const ClassifierParams& params, const Matrix& labeled_x, std::span<const std::size_t> labeled_y,
                   const Matrix& pseudo_x, std::span<const std::size_t> pseudo_y, double lambda,
                   std::span<double> grad) {
  if (labeled_x.rows() == 0) throw std::invalid_argument("supervised step needs a non-empty labeled batch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  check_batch(params, labeled_x, labeled_y, "labeled");
  check_batch(params, pseudo_x, pseudo_y, "pseudo");
  if (!grad.empty()) {
    if (grad.size() != params.size()) throw DimensionError("gradient buffer size differs from parameter count");
    std::fill(grad.begin(), grad.end(), 0.0);
  }

  Workspace ws(params);
  LossTerms terms;
  const double nl = static_cast<double>(labeled_x.rows());
  terms.labeled = accumulate(params, labeled_x, labeled_y, 1.0 / nl, ws, grad) / nl;
  if (pseudo_x.rows() > 0 && lambda > 0.0) {
    const double np = static_cast<double>(pseudo_x.rows());
    terms.pseudo = accumulate(params, pseudo_x, pseudo_y, lambda / np, ws, grad) / np;
  }
  terms.total = terms.labeled + lambda * terms.pseudo;
  return terms;
}

}  // namespace

Matrix logits(const ClassifierParams& params, const Matrix& features) {
  if (features.rows() > 0 && features.cols() != params.input_dim()) {
    throw DimensionError("features have " + std::to_string(features.cols()) + " columns, model expects " +
                         std::to_string(params.input_dim()));
  }
  Workspace ws(params);
  Matrix out(features.rows(), params.outputs());
  for (std::size_t n = 0; n < features.rows(); ++n) {
    forward_one(params, features.row(n), ws);
    std::copy(ws.z.begin(), ws.z.end(), out.row(n).begin());
  }
  return out;
}

PredictionMatrix forward(const ClassifierParams& params, const Matrix& features) {
  Matrix z = logits(params, features);
  std::vector<double> probs(params.outputs());
  for (std::size_t n = 0; n < z.rows(); ++n) {
    softmax(z.row(n), probs);
    std::copy(probs.begin(), probs.end(), z.row(n).begin());
  }
  return PredictionMatrix(std::move(z));
}

LossTerms loss_and_gradient(const ClassifierParams& params, const Matrix& labeled_x,
                            std::span<const std::size_t> labeled_y, const Matrix& pseudo_x,
                            std::span<const std::size_t> pseudo_y, double lambda, std::span<double> grad) {
  if (grad.size() != params.size()) throw DimensionError("gradient buffer size differs from parameter count");
  return evaluate(params, labeled_x, labeled_y, pseudo_x, pseudo_y, lambda, grad);
}

LossTerms loss_only(const ClassifierParams& params, const Matrix& labeled_x, std::span<const std::size_t> labeled_y,
                    const Matrix& pseudo_x, std::span<const std::size_t> pseudo_y, double lambda) {
  return evaluate(params, labeled_x, labeled_y, pseudo_x, pseudo_y, lambda, {});
}

AdamOptimizer::AdamOptimizer(std::size_t n_params, AdamOptions options)
    : options_(options), m_(n_params, 0.0), v_(n_params, 0.0) {
  if (!(options_.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

void AdamOptimizer::step(ClassifierParams& params, std::span<const double> grad) {
  if (grad.size() != m_.size() || params.size() != m_.size()) throw DimensionError("optimizer size mismatch");
  ++t_;
  const kernels::AdamCoefficients c{
      options_.learning_rate,
      options_.beta1,
      options_.beta2,
      options_.epsilon,
      1.0 - std::pow(options_.beta1, static_cast<double>(t_)),
      1.0 - std::pow(options_.beta2, static_cast<double>(t_)),
  };
  kernels::active().adam_update(params.flat().data(), grad.data(), m_.data(), v_.data(), m_.size(), c);
}

EmaModel::EmaModel(ClassifierParams initial, double decay) : shadow_(std::move(initial)), decay_(decay) {
  if (!(decay_ >= 0.0 && decay_ < 1.0)) throw std::invalid_argument("EMA decay must lie in [0, 1)");
}

void EmaModel::update(const ClassifierParams& current) {
  if (current.size() != shadow_.size()) throw DimensionError("EMA shape mismatch");
  kernels::active().axpby(1.0 - decay_, current.flat().data(), decay_, shadow_.flat().data(), shadow_.size());
}

StepResult supervised_step(ClassifierParams& params, AdamOptimizer& optimizer, const Matrix& labeled_x,
                           std::span<const std::size_t> labeled_y, const Matrix& pseudo_x,
                           std::span<const std::size_t> pseudo_y, double lambda) {
  std::vector<double> grad(params.size());
  StepResult result{loss_and_gradient(params, labeled_x, labeled_y, pseudo_x, pseudo_y, lambda, grad)};
  optimizer.step(params, grad);
  return result;
}

}  // namespace upsilon
