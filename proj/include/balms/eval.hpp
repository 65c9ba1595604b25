#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "balms/common.hpp"
#include "balms/counts.hpp"
#include "balms/dataset.hpp"
#include "balms/errors.hpp"
#include "balms/losses.hpp"
#include "balms/model.hpp"

namespace balms::eval {

// Ties resolve to the lowest class index, everywhere predictions are made.
inline int argmax_lowest(const Vector& v) {
  require_shape(v.size() >= 1, "argmax_lowest: empty vector");
  int best = 0;
  for (long j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = static_cast<int>(j);
  return best;
}

struct EvalReport {
  double overall = 0.0;
  std::optional<double> many, medium, few;
  Vector p_y;                        // mean inference-time softmax marginal
  std::vector<double> per_class_acc; // k entries
  bool balanced_test = true;
};

// Top-1 accuracy under plain softmax at inference, overall and per shot
// split, plus the marginal p(y) = mean over the set of softmax probabilities.
inline EvalReport evaluate(const model::ModelParams& params, const datagen::Dataset& test,
                           const datagen::ShotSplit& split) {
  test.validate();
  const int k = test.k();
  require_shape(params.k() == k, "evaluate: model k != dataset k");
  EvalReport rep;
  rep.p_y = Vector::Zero(k);
  rep.per_class_acc.assign(k, 0.0);
  std::vector<long> correct(k, 0);
  const Matrix logits = model::forward(params, test.x);
  for (long i = 0; i < test.n(); ++i) {
    const Vector row = logits.row(i);
    rep.p_y += losses::softmax_probs(row);
    if (argmax_lowest(row) == test.y[i]) ++correct[test.y[i]];
  }
  rep.p_y /= static_cast<double>(test.n());
  long total_correct = 0;
  for (int j = 0; j < k; ++j) {
    total_correct += correct[j];
    rep.per_class_acc[j] = static_cast<double>(correct[j]) / static_cast<double>(test.counts.n[j]);
  }
  rep.overall = static_cast<double>(total_correct) / static_cast<double>(test.n());
  auto split_acc = [&](const std::vector<int>& classes) -> std::optional<double> {
    if (classes.empty()) return std::nullopt;
    long hits = 0, count = 0;
    for (int j : classes) {
      require_shape(j >= 0 && j < k, "evaluate: split class out of range");
      hits += correct[j];
      count += test.counts.n[j];
    }
    return static_cast<double>(hits) / static_cast<double>(count);
  };
  rep.many = split_acc(split.many);
  rep.medium = split_acc(split.medium);
  rep.few = split_acc(split.few);
  rep.balanced_test = test.counts.max() == test.counts.min();
  return rep;
}

// Population variance of the class rates.
inline double rate_variance(const Vector& rates) {
  require_shape(rates.size() >= 1, "rate_variance: empty rates");
  const double mean = rates.mean();
  return (rates.array() - mean).square().sum() / static_cast<double>(rates.size());
}

struct Bbox {
  double xlo = -3.0, xhi = 3.0, ylo = -3.0, yhi = 3.0;
};

// Decision map of a 2-D model over a regular grid, plus for every class pair
// the signed distance from the minority anchor to the pairwise decision
// boundary along the segment toward the majority anchor. Negative distance
// means the boundary sits behind the minority anchor; NaN means the logit
// difference never crosses zero near the segment.
struct BoundaryProbe {
  int resolution = 0;
  Bbox box;
  Vector xs, ys;
  std::vector<int> labels;  // row-major, labels[r * resolution + c] at (xs[c], ys[r])
  Matrix pair_distance;     // k x k, symmetric, NaN diagonal
};

inline BoundaryProbe boundary_probe(const model::ModelParams& params, const Matrix& anchors,
                                    const datagen::ClassCounts& counts, const Bbox& box,
                                    int resolution) {
  counts.validate();
  const int k = counts.k();
  require_shape(params.in_dim() == 2, "boundary_probe: model input must be 2-D");
  require_shape(anchors.rows() == k && anchors.cols() == 2, "boundary_probe: anchors shaped k x 2");
  require_spec(resolution >= 2, "boundary_probe: resolution must be >= 2");
  require_spec(box.xhi > box.xlo && box.yhi > box.ylo, "boundary_probe: degenerate bbox");
  BoundaryProbe probe;
  probe.resolution = resolution;
  probe.box = box;
  probe.xs = Vector::LinSpaced(resolution, box.xlo, box.xhi);
  probe.ys = Vector::LinSpaced(resolution, box.ylo, box.yhi);
  Matrix grid(static_cast<long>(resolution) * resolution, 2);
  for (int r = 0; r < resolution; ++r)
    for (int c = 0; c < resolution; ++c) {
      grid(static_cast<long>(r) * resolution + c, 0) = probe.xs[c];
      grid(static_cast<long>(r) * resolution + c, 1) = probe.ys[r];
    }
  const Matrix logits = model::forward(params, grid);
  probe.labels.resize(logits.rows());
  for (long i = 0; i < logits.rows(); ++i) probe.labels[i] = argmax_lowest(logits.row(i));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  probe.pair_distance = Matrix::Constant(k, k, nan);
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) {
      const int lo = counts.n[a] <= counts.n[b] ? a : b;  // minority end
      const int hi = lo == a ? b : a;
      const Eigen::RowVector2d p0 = anchors.row(lo);
      const Eigen::RowVector2d dir = anchors.row(hi) - anchors.row(lo);
      auto g = [&](double t) {
        Matrix pt = (p0 + t * dir);
        const Vector lg = model::forward(params, pt).row(0);
        return lg[lo] - lg[hi];
      };
      // scan a little beyond both anchors, keep the root nearest the
      // minority anchor
      const int steps = 600;
      const double t0 = -1.0, t1 = 2.0;
      double best_root = nan;
      auto consider = [&](double root) {
        if (std::isnan(best_root) || std::abs(root) < std::abs(best_root)) best_root = root;
      };
      double prev_t = t0, prev_g = g(t0);
      if (prev_g == 0.0) consider(prev_t);
      for (int i = 1; i <= steps; ++i) {
        const double t = t0 + (t1 - t0) * static_cast<double>(i) / steps;
        const double gt = g(t);
        if (gt == 0.0) {
          consider(t);
        } else if (prev_g != 0.0 && (prev_g < 0.0) != (gt < 0.0)) {
          double a0 = prev_t, a1 = t, g0 = prev_g;
          for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (a0 + a1);
            const double gm = g(mid);
            if (gm == 0.0) {
              a0 = a1 = mid;
              break;
            }
            if ((g0 < 0.0) == (gm < 0.0)) {
              a0 = mid;
              g0 = gm;
            } else {
              a1 = mid;
            }
          }
          consider(0.5 * (a0 + a1));
        }
        prev_t = t;
        prev_g = gt;
      }
      const double dist = std::isnan(best_root) ? nan : best_root * dir.norm();
      probe.pair_distance(a, b) = dist;
      probe.pair_distance(b, a) = dist;
    }
  return probe;
}

// Cells assigned to one class; grid-area diagnostics for the 2-D probes.
inline long region_cells(const BoundaryProbe& probe, int cls) {
  long cells = 0;
  for (int label : probe.labels) cells += label == cls ? 1 : 0;
  return cells;
}

inline void require_same_grid(const BoundaryProbe& a, const BoundaryProbe& b) {
  require_shape(a.resolution == b.resolution && a.labels.size() == b.labels.size(),
                "boundary probes use different grids");
}

inline long label_diff_count(const BoundaryProbe& a, const BoundaryProbe& b) {
  require_same_grid(a, b);
  long diff = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) diff += a.labels[i] != b.labels[i] ? 1 : 0;
  return diff;
}

// True when some 4-neighbor carries a different label, i.e. the cell touches
// a decision boundary of the probe.
inline bool is_boundary_cell(const BoundaryProbe& probe, int r, int c) {
  const int res = probe.resolution;
  const int self = probe.labels[static_cast<std::size_t>(r) * res + c];
  const int dr[] = {-1, 1, 0, 0};
  const int dc[] = {0, 0, -1, 1};
  for (int i = 0; i < 4; ++i) {
    const int rr = r + dr[i], cc = c + dc[i];
    if (rr < 0 || rr >= res || cc < 0 || cc >= res) continue;
    if (probe.labels[static_cast<std::size_t>(rr) * res + cc] != self) return true;
  }
  return false;
}

// Two probes agree up to boundary jitter when every differing cell sits on a
// decision boundary of both maps.
inline bool diff_confined_to_boundary(const BoundaryProbe& a, const BoundaryProbe& b) {
  require_same_grid(a, b);
  const int res = a.resolution;
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * res + c;
      if (a.labels[i] == b.labels[i]) continue;
      if (!is_boundary_cell(a, r, c) || !is_boundary_cell(b, r, c)) return false;
    }
  return true;
}

}  // namespace balms::eval
