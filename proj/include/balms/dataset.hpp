#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "balms/common.hpp"
#include "balms/counts.hpp"
#include "balms/errors.hpp"

namespace balms::datagen {

// Ground-truth mixture the synthetic data was drawn from, kept around so the
// Bayes-optimal posterior stays computable for any prior.
struct GaussianOracle {
  Matrix means;        // k x d
  double sigma = 1.0;  // isotropic std dev, shared across classes
};

struct Dataset {
  Matrix x;            // n x d
  std::vector<int> y;  // n labels in [0, k)
  ClassCounts counts;
  std::optional<GaussianOracle> oracle;

  long n() const { return x.rows(); }
  int d() const { return static_cast<int>(x.cols()); }
  int k() const { return counts.k(); }

  void validate() const {
    counts.validate();
    require_shape(static_cast<long>(y.size()) == n(), "Dataset: label count != row count");
    std::vector<long> hist(counts.k(), 0);
    for (int label : y) {
      require_shape(label >= 0 && label < counts.k(), "Dataset: label out of range");
      ++hist[label];
    }
    for (int j = 0; j < counts.k(); ++j)
      require_spec(hist[j] == counts.n[j], "Dataset: label histogram disagrees with counts");
    if (oracle) {
      require_shape(oracle->means.rows() == counts.k() && oracle->means.cols() == d(),
                    "Dataset: oracle means shaped k x d");
      require_spec(oracle->sigma > 0.0, "Dataset: oracle sigma must be positive");
    }
  }
};

// Class-mean layout: vertices of a regular simplex with edge 2*separation
// when the ambient dimension allows it (d >= k-1, via the Helmert basis of
// the hyperplane orthogonal to 1), otherwise equally spaced along axis 0
// with the same 2*separation gap, descending in class index. Both layouts
// coincide where they overlap (k = 2 gives +-separation).
inline Matrix class_mean_layout(int k, int d, double separation) {
  require_spec(k >= 1 && d >= 1, "class_mean_layout: k and d must be >= 1");
  require_spec(separation > 0.0, "class_mean_layout: separation must be positive");
  Matrix means = Matrix::Zero(k, d);
  if (k == 1) return means;
  if (d >= k - 1) {
    for (int r = 1; r < k; ++r) {
      const double s = 1.0 / std::sqrt(static_cast<double>(r) * (r + 1));
      for (int j = 0; j < r; ++j) means(j, r - 1) += s;
      means(r, r - 1) -= s * r;
    }
    means *= std::sqrt(2.0) * separation;
  } else {
    for (int j = 0; j < k; ++j) means(j, 0) = separation * static_cast<double>((k - 1) - 2 * j);
  }
  return means;
}

inline Dataset gen_gaussian_mixture(const ClassCounts& counts, int d, double separation,
                                    std::uint64_t seed) {
  counts.validate();
  const int k = counts.k();
  const Matrix means = class_mean_layout(k, d, separation);
  Dataset ds;
  ds.counts = counts;
  ds.x.resize(counts.total(), d);
  ds.y.resize(counts.total());
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  long row = 0;
  for (int j = 0; j < k; ++j) {
    for (long i = 0; i < counts.n[j]; ++i, ++row) {
      for (int c = 0; c < d; ++c) ds.x(row, c) = means(j, c) + normal(rng);
      ds.y[row] = j;
    }
  }
  ds.oracle = GaussianOracle{means, 1.0};
  return ds;
}

// Bayes posterior of the oracle mixture under an arbitrary class prior.
inline Vector oracle_posterior(const GaussianOracle& oracle, const Vector& x,
                               const Vector& prior) {
  const int k = static_cast<int>(oracle.means.rows());
  require_shape(x.size() == oracle.means.cols(), "oracle_posterior: x dimension mismatch");
  require_shape(prior.size() == k, "oracle_posterior: prior length != k");
  for (int j = 0; j < k; ++j)
    require_spec(prior[j] > 0.0, "oracle_posterior: prior entries must be positive");
  const double inv2s2 = 1.0 / (2.0 * oracle.sigma * oracle.sigma);
  Vector logp(k);
  for (int j = 0; j < k; ++j)
    logp[j] = std::log(prior[j]) - (x.transpose() - oracle.means.row(j)).squaredNorm() * inv2s2;
  const double lse = logsumexp(logp);
  return (logp.array() - lse).exp();
}

inline Matrix oracle_posterior(const GaussianOracle& oracle, const Matrix& x,
                               const Vector& prior) {
  Matrix out(x.rows(), oracle.means.rows());
  for (long i = 0; i < x.rows(); ++i)
    out.row(i) = oracle_posterior(oracle, Vector(x.row(i)), prior).transpose();
  return out;
}

// Class-balanced resample with replacement: each draw picks a class uniformly
// and then an instance uniformly within that class. The result's counts are
// the realized histogram of the draws.
inline Dataset build_meta_set(const Dataset& train, long size, std::uint64_t seed) {
  train.validate();
  require_spec(size >= 1, "build_meta_set: size must be >= 1");
  const int k = train.k();
  std::vector<std::vector<long>> by_class(k);
  for (long i = 0; i < train.n(); ++i) by_class[train.y[i]].push_back(i);
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> pick_class(0, k - 1);
  Dataset meta;
  meta.x.resize(size, train.d());
  meta.y.resize(size);
  meta.counts.n.assign(k, 0);
  for (long t = 0; t < size; ++t) {
    const int j = pick_class(rng);
    std::uniform_int_distribution<long> pick_row(0, static_cast<long>(by_class[j].size()) - 1);
    const long src = by_class[j][pick_row(rng)];
    meta.x.row(t) = train.x.row(src);
    meta.y[t] = j;
    ++meta.counts.n[j];
  }
  // A tiny meta set can miss a class entirely; counts must stay valid.
  for (int j = 0; j < k; ++j)
    require_spec(meta.counts.n[j] >= 1, "build_meta_set: size too small to cover every class");
  meta.oracle = train.oracle;
  return meta;
}

}  // namespace balms::datagen
