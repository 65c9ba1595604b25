#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "balms/common.hpp"
#include "balms/errors.hpp"

namespace balms::sampler {

// Learnable sample rates. psi is unconstrained; the per-class rate is
// sigmoid(psi_j), so a fresh state starts every class at rate 0.5.
struct SamplerState {
  Vector psi;
  double tau = 1.0;

  static SamplerState init(int k) {
    require_spec(k >= 1, "SamplerState: k must be >= 1");
    return SamplerState{Vector::Zero(k), 1.0};
  }

  Vector rates() const {
    Vector r(psi.size());
    for (long j = 0; j < psi.size(); ++j) r[j] = sigmoid(psi[j]);
    return r;
  }
};

// Uniform draw of B instance indices with replacement.
inline std::vector<int> instance_batch(long n, int b, std::uint64_t seed) {
  require_spec(n >= 1 && b >= 1, "instance_batch: need n >= 1 and B >= 1");
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<long> pick(0, n - 1);
  std::vector<int> idx(b);
  for (int i = 0; i < b; ++i) idx[i] = static_cast<int>(pick(rng));
  return idx;
}

// B/k draws per class, uniform with replacement inside each class.
inline std::vector<int> class_balanced_batch(const std::vector<int>& labels, int k, int b,
                                             std::uint64_t seed) {
  require_spec(k >= 1 && b >= 1, "class_balanced_batch: need k >= 1 and B >= 1");
  require_spec(b % k == 0, "class_balanced_batch: B must be divisible by k");
  std::vector<std::vector<int>> by_class(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require_spec(labels[i] >= 0 && labels[i] < k, "class_balanced_batch: label out of range");
    by_class[labels[i]].push_back(static_cast<int>(i));
  }
  for (int j = 0; j < k; ++j)
    require_spec(!by_class[j].empty(), "class_balanced_batch: a class has no instances");
  Rng rng = make_rng(seed);
  std::vector<int> idx;
  idx.reserve(b);
  const int per = b / k;
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(by_class[j].size()) - 1);
    for (int i = 0; i < per; ++i) idx.push_back(by_class[j][pick(rng)]);
  }
  return idx;
}

// Per-instance sample distribution rho_i = rate(c(i)) / sum_t rate(c(t)).
// Invariant under any common positive rescaling of the class rates.
inline Vector instance_rates(const Vector& class_rates, const std::vector<int>& labels) {
  const int k = static_cast<int>(class_rates.size());
  require_spec(k >= 1 && !labels.empty(), "instance_rates: need rates and labels");
  for (int j = 0; j < k; ++j)
    require_spec(class_rates[j] > 0.0, "instance_rates: class rates must be positive");
  double denom = 0.0;
  for (int label : labels) {
    require_spec(label >= 0 && label < k, "instance_rates: label out of range");
    denom += class_rates[label];
  }
  Vector rho(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) rho[i] = class_rates[labels[i]] / denom;
  return rho;
}

inline Vector instance_rates(const SamplerState& state, const std::vector<int>& labels) {
  return instance_rates(state.rates(), labels);
}

// Loss weights of the reweighting variant: w_i = rate(label_i), smooth in psi.
inline Vector meta_reweighter_weights(const SamplerState& state, const std::vector<int>& labels) {
  const Vector r = state.rates();
  Vector w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require_spec(labels[i] >= 0 && labels[i] < r.size(),
                 "meta_reweighter_weights: label out of range");
    w[i] = r[labels[i]];
  }
  return w;
}

inline Matrix draw_gumbels(int b, long n, std::uint64_t seed) {
  require_spec(b >= 1 && n >= 1, "draw_gumbels: need B >= 1 and n >= 1");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix g(b, n);
  for (int r = 0; r < b; ++r)
    for (long c = 0; c < n; ++c) {
      double u = unif(rng);
      if (u <= 0.0) u = std::numeric_limits<double>::min();
      g(r, c) = -std::log(-std::log(u));
    }
  return g;
}

// One relaxed categorical row per batch slot plus its hard argmax. The hard
// index is what the forward pass selects; the relaxed row is the
// differentiable surrogate the backward pass runs through.
struct SampleMatrix {
  Matrix relaxed;           // B x n, rows on the simplex
  std::vector<int> chosen;  // argmax per row
  double tau = 1.0;
};

inline SampleMatrix gumbel_st_sample(const Vector& rho, const Matrix& gumbels, double tau) {
  const long n = rho.size();
  require_spec(n >= 1, "gumbel_st_sample: empty distribution");
  require_spec(tau > 0.0, "gumbel_st_sample: tau must be positive");
  require_shape(gumbels.cols() == n, "gumbel_st_sample: gumbel columns != n");
  double total = 0.0;
  for (long i = 0; i < n; ++i) {
    require_spec(rho[i] > 0.0, "gumbel_st_sample: rho must be strictly positive");
    total += rho[i];
  }
  require_spec(std::abs(total - 1.0) < 1e-9, "gumbel_st_sample: rho must sum to 1");
  const int b = static_cast<int>(gumbels.rows());
  SampleMatrix s;
  s.tau = tau;
  s.relaxed.resize(b, n);
  s.chosen.resize(b);
  const Vector logrho = rho.array().log();
  for (int r = 0; r < b; ++r) {
    Vector z = (logrho + gumbels.row(r).transpose()) / tau;
    int arg = 0;
    z.maxCoeff(&arg);
    s.chosen[r] = arg;
    const double m = z[arg];
    Vector e = (z.array() - m).exp();
    s.relaxed.row(r) = (e / e.sum()).transpose();
  }
  return s;
}

inline SampleMatrix gumbel_st_sample(const Vector& rho, int b, double tau, std::uint64_t seed) {
  return gumbel_st_sample(rho, draw_gumbels(b, rho.size(), seed), tau);
}

// Straight-through loss reconnection. The forward value is exactly the plain
// mean of the selected per-sample losses; the psi-gradient of the same
// quantity flows through the relaxed rows (see reconnect_loss_dpsi).
inline double reconnect_loss(const Vector& losses, const SampleMatrix& s) {
  const int b = static_cast<int>(s.relaxed.rows());
  require_shape(losses.size() == b, "reconnect_loss: losses length != B");
  require_shape(static_cast<int>(s.chosen.size()) == b, "reconnect_loss: chosen length != B");
  for (int r = 0; r < b; ++r) {
    int arg = 0;
    s.relaxed.row(r).maxCoeff(&arg);
    if (arg != s.chosen[r])
      throw contract_violation("reconnect_loss: chosen index is not the row argmax");
  }
  return losses.mean();
}

// d log rho_i / d psi_j for rho built from sigmoid(psi) rates:
// delta_{c(i),j} (1 - r_j) - m_j r_j (1 - r_j) / S, with m_j the class count
// among labels and S = sum_j m_j r_j.
inline Matrix dlogrho_dpsi(const SamplerState& state, const std::vector<int>& labels) {
  const int k = static_cast<int>(state.psi.size());
  const Vector r = state.rates();
  std::vector<long> m(k, 0);
  for (int label : labels) {
    require_spec(label >= 0 && label < k, "dlogrho_dpsi: label out of range");
    ++m[label];
  }
  double s = 0.0;
  for (int j = 0; j < k; ++j) s += static_cast<double>(m[j]) * r[j];
  Matrix jac(labels.size(), k);
  for (int j = 0; j < k; ++j) {
    const double drift = static_cast<double>(m[j]) * r[j] * (1.0 - r[j]) / s;
    for (std::size_t i = 0; i < labels.size(); ++i)
      jac(static_cast<long>(i), j) = (labels[i] == j ? 1.0 - r[j] : 0.0) - drift;
  }
  return jac;
}

// v^T (d log rho / d psi) without materializing the Jacobian.
inline Vector dpsi_from_dlogrho(const SamplerState& state, const std::vector<int>& labels,
                                const Vector& v) {
  const int k = static_cast<int>(state.psi.size());
  require_shape(v.size() == static_cast<long>(labels.size()), "dpsi_from_dlogrho: length mismatch");
  const Vector r = state.rates();
  std::vector<long> m(k, 0);
  Vector class_sum = Vector::Zero(k);
  double vtotal = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require_spec(labels[i] >= 0 && labels[i] < k, "dpsi_from_dlogrho: label out of range");
    ++m[labels[i]];
    class_sum[labels[i]] += v[i];
    vtotal += v[i];
  }
  double s = 0.0;
  for (int j = 0; j < k; ++j) s += static_cast<double>(m[j]) * r[j];
  Vector out(k);
  for (int j = 0; j < k; ++j)
    out[j] = (1.0 - r[j]) * class_sum[j] -
             static_cast<double>(m[j]) * r[j] * (1.0 - r[j]) / s * vtotal;
  return out;
}

// Gradient of the reconnected loss in psi with the per-sample losses held
// fixed: (1/B) sum_b l_b * d s_b[c_b] / d psi.
inline Vector reconnect_loss_dpsi(const Vector& losses, const SampleMatrix& s,
                                  const SamplerState& state, const std::vector<int>& labels) {
  const int b = static_cast<int>(s.relaxed.rows());
  require_shape(losses.size() == b, "reconnect_loss_dpsi: losses length != B");
  require_shape(s.relaxed.cols() == static_cast<long>(labels.size()),
                "reconnect_loss_dpsi: labels length != n");
  Vector coef(b);
  for (int r = 0; r < b; ++r)
    coef[r] = losses[r] * s.relaxed(r, s.chosen[r]) / (s.tau * b);
  Vector v = -(s.relaxed.transpose() * coef);
  for (int r = 0; r < b; ++r) v[s.chosen[r]] += coef[r];
  return dpsi_from_dlogrho(state, labels, v);
}

}  // namespace balms::sampler
