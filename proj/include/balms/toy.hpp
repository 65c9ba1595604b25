#pragma once

// 2-D probe: three Gaussian class centers, a linear model, and exact
// full-batch gradient descent on the class-collapsed objective
//
//   L = sum_c w_c * loss(W mu_c + b, c) / k,
//
// with w_c = k n_c / n under instance sampling (each class pulls with its
// frequency) and w_c = 1 under class-balanced sampling. Collapsing every
// class to its center keeps one iteration at a handful of flops, which is
// what makes the slowly-separating softmax runs affordable: the margin only
// grows like log t, so visible boundary motion takes millions of steps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "balms/common.hpp"
#include "balms/counts.hpp"
#include "balms/dataset.hpp"
#include "balms/errors.hpp"
#include "balms/eval.hpp"
#include "balms/losses.hpp"
#include "balms/model.hpp"
#include "balms/optim.hpp"

namespace balms::toy {

using balms::datagen::ClassCounts;
using balms::eval::Bbox;
using balms::eval::BoundaryProbe;
using balms::losses::LossKind;
using balms::losses::LossSpec;
using balms::model::Batch;
using balms::model::ForwardCache;
using balms::model::ModelParams;

struct ToyConfig {
  ClassCounts counts{{10000, 100, 1}};
  double separation = 1.5;
  long iters = 200000;
  double lr = 0.5;
  double momentum = 0.9;
  long warmup = 100;
  std::vector<long> snapshots;  // probe after these many steps; final always probed
  int resolution = 16;
  Bbox box;
  std::uint64_t seed = 0;

  void validate() const {
    counts.validate();
    require_spec(counts.k() >= 2, "ToyConfig: need at least two classes");
    require_spec(separation > 0.0, "ToyConfig: separation must be positive");
    require_spec(iters >= 1, "ToyConfig: iters must be >= 1");
    require_spec(lr > 0.0, "ToyConfig: lr must be positive");
    require_spec(momentum >= 0.0 && momentum < 1.0, "ToyConfig: momentum must be in [0, 1)");
    require_spec(warmup >= 0, "ToyConfig: warmup must be >= 0");
    require_spec(resolution >= 2, "ToyConfig: resolution must be >= 2");
    for (long s : snapshots) require_spec(s >= 1 && s <= iters, "ToyConfig: snapshot out of range");
  }
};

struct ToyRun {
  std::string name;
  LossKind loss = LossKind::SoftmaxCE;
  bool cbs = false;
  ModelParams params;
  std::vector<long> snapshot_iters;
  std::vector<BoundaryProbe> probes;  // parallel to snapshot_iters
};

struct ToyResult {
  Matrix anchors;  // k x 2 class centers
  ClassCounts counts;
  std::vector<ToyRun> runs;
};

inline std::vector<long> snapshot_schedule(const ToyConfig& cfg) {
  std::vector<long> snaps = cfg.snapshots;
  snaps.push_back(cfg.iters);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  return snaps;
}

inline ToyRun run_toy_variant(const ToyConfig& cfg, const Matrix& anchors,
                              const ModelParams& init, LossKind loss, bool cbs,
                              const std::string& name) {
  const int k = cfg.counts.k();
  Batch batch;
  batch.x = anchors;
  batch.y.resize(k);
  for (int c = 0; c < k; ++c) batch.y[c] = c;
  if (!cbs) {
    batch.w.resize(k);
    const double n = static_cast<double>(cfg.counts.total());
    for (int c = 0; c < k; ++c)
      batch.w[c] = static_cast<double>(k) * static_cast<double>(cfg.counts.n[c]) / n;
  }

  LossSpec spec;
  spec.kind = loss;
  spec.counts = cfg.counts;

  balms::train::Schedule sched;
  sched.lr_max = cfg.lr;
  sched.lr_min = cfg.lr;
  sched.warmup = std::min(cfg.warmup, cfg.iters - 1);
  sched.total = cfg.iters;

  balms::train::Sgd opt;
  opt.momentum = cfg.momentum;

  ToyRun run;
  run.name = name;
  run.loss = loss;
  run.cbs = cbs;
  run.params = init;
  const std::vector<long> snaps = snapshot_schedule(cfg);
  std::size_t next_snap = 0;

  for (long t = 0; t < cfg.iters; ++t) {
    const ForwardCache cache = balms::model::forward_cached(run.params, batch.x);
    const balms::losses::BatchLoss bl =
        balms::losses::batch_loss(spec, cache.logits, batch.y, batch.w);
    if (!std::isfinite(bl.value)) throw numeric_error("toy2d: loss diverged in " + name);
    const balms::model::ModelGrad g = balms::model::backward(run.params, batch, cache, bl.dlogits);
    opt.step(run.params, g, balms::train::cosine_lr(t, sched));
    if (next_snap < snaps.size() && t + 1 == snaps[next_snap]) {
      run.snapshot_iters.push_back(snaps[next_snap]);
      run.probes.push_back(
          balms::eval::boundary_probe(run.params, anchors, cfg.counts, cfg.box, cfg.resolution));
      ++next_snap;
    }
  }
  return run;
}

// The four standard runs off one shared init: plain softmax and balanced
// softmax, each under instance and class-balanced sampling.
inline ToyResult run_toy2d(const ToyConfig& cfg) {
  cfg.validate();
  const int k = cfg.counts.k();
  ToyResult res;
  res.anchors = balms::datagen::class_mean_layout(k, 2, cfg.separation);
  res.counts = cfg.counts;
  const ModelParams init = balms::model::init_model(2, {}, k, mix_seed(cfg.seed, 21));
  res.runs.push_back(run_toy_variant(cfg, res.anchors, init, LossKind::SoftmaxCE, false, "softmax"));
  res.runs.push_back(
      run_toy_variant(cfg, res.anchors, init, LossKind::SoftmaxCE, true, "softmax_cbs"));
  res.runs.push_back(run_toy_variant(cfg, res.anchors, init, LossKind::BalancedSoftmax, false,
                                     "balanced_softmax"));
  res.runs.push_back(run_toy_variant(cfg, res.anchors, init, LossKind::BalancedSoftmax, true,
                                     "balanced_softmax_cbs"));
  return res;
}

}  // namespace balms::toy
