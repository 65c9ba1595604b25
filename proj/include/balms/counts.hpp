#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "balms/common.hpp"
#include "balms/errors.hpp"

namespace balms::datagen {

// Per-class training-set sizes, ordered by class index. Long-tailed
// constructors emit them non-increasing (class 0 is the head).
struct ClassCounts {
  std::vector<long> n;

  int k() const { return static_cast<int>(n.size()); }

  long total() const { return std::accumulate(n.begin(), n.end(), 0L); }

  long max() const { return *std::max_element(n.begin(), n.end()); }

  long min() const { return *std::min_element(n.begin(), n.end()); }

  double imbalance() const { return static_cast<double>(max()) / static_cast<double>(min()); }

  void validate() const {
    require_spec(!n.empty(), "ClassCounts: need at least one class");
    for (long c : n) require_spec(c >= 1, "ClassCounts: every class needs at least one sample");
  }
};

enum class Profile { Exponential, Pareto, Explicit };

struct ImbalanceSpec {
  Profile profile = Profile::Exponential;
  int k = 10;
  long head_size = 100;
  double factor = 100.0;  // head/tail ratio, exponential profile
  double alpha = 6.0;     // pareto shape
  long min_count = 1;     // pareto floor
  std::vector<long> explicit_counts;
};

inline long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

// Per-class decay of the exponential profile: factor^(-1/(k-1)), so that
// head * mu^(k-1) = head / factor.
inline double decay_mu(double factor, int k) {
  require_spec(k >= 2, "decay_mu: defined for k >= 2");
  require_spec(factor >= 1.0, "decay_mu: imbalance factor must be >= 1");
  return std::pow(factor, -1.0 / static_cast<double>(k - 1));
}

inline ClassCounts make_longtail_counts(int k, long head_size, double factor) {
  require_spec(k >= 1, "make_longtail_counts: k must be >= 1");
  require_spec(head_size >= 1, "make_longtail_counts: head_size must be >= 1");
  require_spec(factor >= 1.0, "make_longtail_counts: imbalance factor must be >= 1");
  require_spec(factor <= static_cast<double>(head_size),
               "make_longtail_counts: factor beyond head_size would round the tail below 1");
  ClassCounts out;
  out.n.resize(k);
  out.n[0] = head_size;
  if (k == 1) return out;
  const double mu = decay_mu(factor, k);
  for (int y = 1; y < k; ++y) {
    const long c = round_half_up(static_cast<double>(head_size) * std::pow(mu, y));
    out.n[y] = std::max(1L, c);
  }
  return out;
}

inline ClassCounts make_explicit_counts(std::vector<long> counts) {
  ClassCounts out{std::move(counts)};
  out.validate();
  for (std::size_t i = 1; i < out.n.size(); ++i)
    require_spec(out.n[i] <= out.n[i - 1], "make_explicit_counts: counts must be non-increasing");
  return out;
}

// Class sizes from a Lomax(alpha) draw: k-1 sampled sizes, sorted descending,
// scaled so the largest equals head_size, rounded half-up and floored at
// min_count; the head class itself is pinned at head_size.
inline ClassCounts make_pareto_counts(int k, long head_size, double alpha, std::uint64_t seed,
                                      long min_count = 1) {
  require_spec(k >= 1, "make_pareto_counts: k must be >= 1");
  require_spec(alpha > 0.0, "make_pareto_counts: alpha must be positive");
  require_spec(min_count >= 1, "make_pareto_counts: min_count must be >= 1");
  require_spec(head_size >= min_count, "make_pareto_counts: head_size below min_count");
  ClassCounts out;
  out.n.resize(k);
  out.n[0] = head_size;
  if (k == 1) return out;
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> v(k - 1);
  for (double& x : v) {
    double u = unif(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    x = std::pow(u, -1.0 / alpha) - 1.0;
  }
  std::sort(v.begin(), v.end(), std::greater<>());
  const double vmax = v.front();
  for (int i = 0; i < k - 1; ++i) {
    const long c = round_half_up(static_cast<double>(head_size) * v[i] / vmax);
    out.n[i + 1] = std::max(min_count, c);
  }
  return out;
}

inline ClassCounts make_counts(const ImbalanceSpec& spec, std::uint64_t seed) {
  switch (spec.profile) {
    case Profile::Exponential:
      return make_longtail_counts(spec.k, spec.head_size, spec.factor);
    case Profile::Pareto:
      return make_pareto_counts(spec.k, spec.head_size, spec.alpha, seed, spec.min_count);
    case Profile::Explicit:
      return make_explicit_counts(spec.explicit_counts);
  }
  throw invalid_spec("make_counts: unknown profile");
}

inline ClassCounts uniform_counts(int k, long per_class) {
  require_spec(k >= 1 && per_class >= 1, "uniform_counts: k and per_class must be >= 1");
  return ClassCounts{std::vector<long>(static_cast<std::size_t>(k), per_class)};
}

// Class indices grouped by training-set size. Boundaries are exclusive on
// both sides: many needs count > many_gt, few needs count < few_lt.
struct ShotSplit {
  std::vector<int> many, medium, few;
};

inline ShotSplit split_shots(const ClassCounts& counts, long many_gt = 100, long few_lt = 20) {
  counts.validate();
  require_spec(few_lt <= many_gt + 1, "split_shots: overlapping shot thresholds");
  ShotSplit s;
  for (int j = 0; j < counts.k(); ++j) {
    if (counts.n[j] > many_gt)
      s.many.push_back(j);
    else if (counts.n[j] < few_lt)
      s.few.push_back(j);
    else
      s.medium.push_back(j);
  }
  return s;
}

}  // namespace balms::datagen
