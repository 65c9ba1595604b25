#pragma once

#include <cmath>
#include <vector>

#include "balms/common.hpp"
#include "balms/counts.hpp"
#include "balms/errors.hpp"

namespace balms::losses {

using datagen::ClassCounts;

inline Vector softmax_probs(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

inline Vector log_counts(const ClassCounts& counts) {
  Vector ln(counts.k());
  for (int j = 0; j < counts.k(); ++j) ln[j] = std::log(static_cast<double>(counts.n[j]));
  return ln;
}

// Training-prior-corrected posterior: softmax over logits shifted by
// q*log(n_j). q = 1 is the exact correction, q = 1/4 the conservative
// margin-bound variant.
inline Vector balanced_phi(const Vector& logits, const ClassCounts& counts, double q = 1.0) {
  counts.validate();
  require_shape(logits.size() == counts.k(), "balanced_phi: logits length != k");
  require_spec(q >= 0.0, "balanced_phi: q must be non-negative");
  return softmax_probs(logits + q * log_counts(counts));
}

inline double balanced_softmax_loss(const Vector& logits, int y, const ClassCounts& counts,
                                    double q = 1.0) {
  counts.validate();
  require_shape(logits.size() == counts.k(), "balanced_softmax_loss: logits length != k");
  require_spec(y >= 0 && y < counts.k(), "balanced_softmax_loss: label out of range");
  require_spec(q >= 0.0, "balanced_softmax_loss: q must be non-negative");
  const Vector adj = logits + q * log_counts(counts);
  return logsumexp(adj) - adj[y];
}

inline Vector balanced_softmax_dlogits(const Vector& logits, int y, const ClassCounts& counts,
                                       double q = 1.0) {
  Vector d = balanced_phi(logits, counts, q);
  require_spec(y >= 0 && y < counts.k(), "balanced_softmax_dlogits: label out of range");
  d[y] -= 1.0;
  return d;
}

// Per-class logit offsets of the one-vs-all variant. delta_j is the log odds
// correction that maps the imbalanced binary problem for class j onto the
// balanced one: log[(n/k)/n_j * (n-n_j)/(n-n/k)].
inline Vector binary_balanced_offsets(const ClassCounts& counts) {
  counts.validate();
  const int k = counts.k();
  require_spec(k >= 2, "binary_balanced_offsets: need at least two classes");
  const double n = static_cast<double>(counts.total());
  const double base = n / static_cast<double>(k);
  Vector delta(k);
  for (int j = 0; j < k; ++j) {
    const double nj = static_cast<double>(counts.n[j]);
    require_spec(n - nj > 0.0, "binary_balanced_offsets: one class holds every sample");
    delta[j] = std::log(base / nj) + std::log((n - nj) / (n - base));
  }
  return delta;
}

// Sum over classes of the binary cross entropy of sigmoid(eta_j - delta_j)
// against the one-hot target.
inline double binary_logistic_balanced_loss(const Vector& logits, int y,
                                            const ClassCounts& counts) {
  const Vector delta = binary_balanced_offsets(counts);
  require_shape(logits.size() == counts.k(), "binary_logistic_balanced_loss: logits length != k");
  require_spec(y >= 0 && y < counts.k(), "binary_logistic_balanced_loss: label out of range");
  double loss = 0.0;
  for (int j = 0; j < counts.k(); ++j) {
    const double z = logits[j] - delta[j];
    loss += softplus(z);
    if (j == y) loss -= z;
  }
  return loss;
}

inline Vector binary_logistic_balanced_dlogits(const Vector& logits, int y,
                                               const ClassCounts& counts) {
  const Vector delta = binary_balanced_offsets(counts);
  require_shape(logits.size() == counts.k(),
                "binary_logistic_balanced_dlogits: logits length != k");
  require_spec(y >= 0 && y < counts.k(), "binary_logistic_balanced_dlogits: label out of range");
  Vector d(counts.k());
  for (int j = 0; j < counts.k(); ++j) d[j] = sigmoid(logits[j] - delta[j]);
  d[y] -= 1.0;
  return d;
}

// Inverse-frequency weights normalized to mean 1 on a balanced set:
// w_j = (n/k) / n_j.
inline Vector cbw_weights(const ClassCounts& counts) {
  counts.validate();
  const double base = static_cast<double>(counts.total()) / counts.k();
  Vector w(counts.k());
  for (int j = 0; j < counts.k(); ++j) w[j] = base / static_cast<double>(counts.n[j]);
  return w;
}

// How much probability mass the corrected posterior grants class j relative
// to the plain softmax, at the current logits. Approaches n_j/n_y as the
// correct class y dominates.
inline double overbalance_ratio(const Vector& logits, const ClassCounts& counts, int y, int j) {
  counts.validate();
  require_shape(logits.size() == counts.k(), "overbalance_ratio: logits length != k");
  require_spec(y >= 0 && y < counts.k() && j >= 0 && j < counts.k(),
               "overbalance_ratio: class index out of range");
  require_spec(j != y, "overbalance_ratio: j must be a wrong class");
  const Vector adj = logits + log_counts(counts);
  const double log_phi = adj[j] - logsumexp(adj);
  const double log_p = logits[j] - logsumexp(logits);
  return std::exp(log_phi - log_p);
}

// Margins minimizing (1/k) sum_j (1/gamma_j) sqrt(C/n_j) under
// sum gamma_j = beta: gamma_j proportional to n_j^(-1/4).
inline Vector optimal_margins(const ClassCounts& counts, double beta = 1.0) {
  counts.validate();
  require_spec(beta > 0.0, "optimal_margins: beta must be positive");
  Vector g(counts.k());
  for (int j = 0; j < counts.k(); ++j) g[j] = std::pow(static_cast<double>(counts.n[j]), -0.25);
  return beta * g / g.sum();
}

inline double margin_objective(const Vector& margins, const ClassCounts& counts, double c = 1.0) {
  counts.validate();
  require_shape(margins.size() == counts.k(), "margin_objective: margins length != k");
  require_spec(c > 0.0, "margin_objective: c must be positive");
  double acc = 0.0;
  for (int j = 0; j < counts.k(); ++j) {
    require_spec(margins[j] > 0.0, "margin_objective: margins must be positive");
    acc += std::sqrt(c / static_cast<double>(counts.n[j])) / margins[j];
  }
  return acc / counts.k();
}

enum class LossKind { SoftmaxCE, BalancedSoftmax, BinaryLogisticBalanced, SoftmaxCbw };

struct LossSpec {
  LossKind kind = LossKind::SoftmaxCE;
  double q = 1.0;      // BalancedSoftmax only
  ClassCounts counts;  // every kind except SoftmaxCE

  void validate(int k) const {
    if (kind == LossKind::SoftmaxCE) return;
    counts.validate();
    require_shape(counts.k() == k, "LossSpec: counts length != k");
    if (kind == LossKind::BalancedSoftmax) require_spec(q >= 0.0, "LossSpec: q must be non-negative");
    if (kind == LossKind::BinaryLogisticBalanced)
      require_spec(k >= 2, "LossSpec: binary variant needs k >= 2");
  }
};

inline double per_sample_loss(const LossSpec& spec, const Vector& logits, int y) {
  switch (spec.kind) {
    case LossKind::SoftmaxCE:
      require_spec(y >= 0 && y < logits.size(), "per_sample_loss: label out of range");
      return logsumexp(logits) - logits[y];
    case LossKind::BalancedSoftmax:
      return balanced_softmax_loss(logits, y, spec.counts, spec.q);
    case LossKind::BinaryLogisticBalanced:
      return binary_logistic_balanced_loss(logits, y, spec.counts);
    case LossKind::SoftmaxCbw:
      return cbw_weights(spec.counts)[y] * (logsumexp(logits) - logits[y]);
  }
  throw invalid_spec("per_sample_loss: unknown loss kind");
}

inline Vector per_sample_dlogits(const LossSpec& spec, const Vector& logits, int y) {
  switch (spec.kind) {
    case LossKind::SoftmaxCE: {
      require_spec(y >= 0 && y < logits.size(), "per_sample_dlogits: label out of range");
      Vector d = softmax_probs(logits);
      d[y] -= 1.0;
      return d;
    }
    case LossKind::BalancedSoftmax:
      return balanced_softmax_dlogits(logits, y, spec.counts, spec.q);
    case LossKind::BinaryLogisticBalanced:
      return binary_logistic_balanced_dlogits(logits, y, spec.counts);
    case LossKind::SoftmaxCbw: {
      require_spec(y >= 0 && y < logits.size(), "per_sample_dlogits: label out of range");
      Vector d = softmax_probs(logits);
      d[y] -= 1.0;
      return cbw_weights(spec.counts)[y] * d;
    }
  }
  throw invalid_spec("per_sample_dlogits: unknown loss kind");
}

// Batch reduction. value is the arithmetic mean of per-sample losses, each
// scaled by its instance weight first. dlogits rows are d(per-sample loss) /
// d(logits) / B with the instance weights left out: model::backward applies
// them, so the pair (value, dlogits) shares one weighting.
struct BatchLoss {
  double value;
  Matrix dlogits;
};

inline BatchLoss batch_loss(const LossSpec& spec, const Matrix& logits,
                            const std::vector<int>& labels, const Vector& weights = Vector()) {
  const long b = logits.rows();
  require_shape(b >= 1, "batch_loss: empty batch");
  require_shape(static_cast<long>(labels.size()) == b, "batch_loss: labels length != batch");
  require_shape(weights.size() == 0 || weights.size() == b,
                "batch_loss: weights length != batch");
  spec.validate(static_cast<int>(logits.cols()));
  BatchLoss out{0.0, Matrix(b, logits.cols())};
  for (long i = 0; i < b; ++i) {
    const Vector row = logits.row(i);
    const double w = weights.size() ? weights[i] : 1.0;
    out.value += w * per_sample_loss(spec, row, labels[i]);
    out.dlogits.row(i) = per_sample_dlogits(spec, row, labels[i]).transpose() / static_cast<double>(b);
  }
  out.value /= static_cast<double>(b);
  return out;
}

}  // namespace balms::losses
