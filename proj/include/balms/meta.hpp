#pragma once

// Bi-level optimization of the sample distribution. One meta cycle:
//
//   1. surrogate: theta~ = theta - inner_lr * mean_b grad l_b(theta),
//      where the mean is the straight-through reconnected batch loss
//      (hard sample weights are identically 1 in the forward pass).
//   2. outer: psi <- Adam step on dM/dpsi, M = class-balanced meta loss
//      (standard softmax CE on the meta set) evaluated at theta~.
//   3. real: theta <- trainer's optimizer step on the same batch.
//
// The hypergradient never needs a Hessian: psi enters only through the
// relaxed sample weights, which multiply per-sample losses linearly, so
//
//   dM/dpsi = -(inner_lr / B) * sum_b a_b * d s~_b[c_b] / dpsi,
//   a_b = < grad M(theta~), grad_theta l_b(theta) >.
//
// second_order=false replaces grad M(theta~) with grad M(theta): the
// curvature-free approximation that skips the surrogate forward/backward.

#include <cmath>
#include <utility>
#include <vector>

#include "balms/common.hpp"
#include "balms/dataset.hpp"
#include "balms/errors.hpp"
#include "balms/losses.hpp"
#include "balms/model.hpp"
#include "balms/optim.hpp"
#include "balms/sampler.hpp"

namespace balms::meta {

using balms::datagen::Dataset;
using balms::losses::BatchLoss;
using balms::losses::LossSpec;
using balms::model::Batch;
using balms::model::ForwardCache;
using balms::model::ModelGrad;
using balms::model::ModelParams;
using balms::sampler::SamplerState;
using balms::sampler::SampleMatrix;
using balms::train::AdamConfig;
using balms::train::AdamVec;

struct MetaConfig {
  // Learning rate of the inner surrogate step. Zero means "track the
  // model learning rate", resolved by the caller per iteration.
  double inner_lr = 0.0;
  AdamConfig outer;
  int batch = 64;
  LossSpec inner_loss;
  bool second_order = true;
  // Diagnostic mode: the surrogate consumes the relaxed weights directly
  // instead of straight-through hard samples, making the whole pipeline
  // differentiable for finite-difference checks.
  bool relaxed_forward = false;

  void validate() const {
    require_spec(batch >= 1, "meta batch must be >= 1");
    require_spec(inner_lr >= 0.0, "inner_lr must be >= 0");
  }
};

struct MetaState {
  SamplerState sampler;
  AdamVec outer;

  static MetaState init(int k, const AdamConfig& cfg) {
    MetaState s;
    s.sampler = SamplerState::init(k);
    s.outer = AdamVec{cfg};
    return s;
  }
};

// Class-balanced meta objective: plain softmax CE averaged over the meta set.
inline double meta_loss(const ModelParams& p, const Dataset& meta_set) {
  const Matrix logits = balms::model::forward(p, meta_set.x);
  const LossSpec ce;
  const BatchLoss bl = balms::losses::batch_loss(ce, logits, meta_set.y);
  return bl.value;
}

inline std::pair<double, ModelGrad> meta_loss_grad(const ModelParams& p, const Dataset& meta_set) {
  const ForwardCache cache = balms::model::forward_cached(p, meta_set.x);
  const LossSpec ce;
  const BatchLoss bl = balms::losses::batch_loss(ce, cache.logits, meta_set.y);
  Batch mb{meta_set.x, meta_set.y, Vector()};
  return {bl.value, balms::model::backward(p, mb, cache, bl.dlogits)};
}

inline ModelParams surrogate_step(const ModelParams& p, const ModelGrad& g, double lr) {
  ModelParams out = p;
  balms::model::add_scaled(out, g, -lr);
  return out;
}

struct HypergradResult {
  Vector dpsi;
  std::vector<int> chosen;
  double train_loss = 0.0;
  double meta_loss = 0.0;
  ModelGrad batch_grad;  // straight-through mean gradient over the batch
};

// Exact hypergradient of the meta loss after one surrogate step, with the
// given Gumbel noise held fixed. gumbels is batch x n.
inline HypergradResult hypergradient(const ModelParams& p, const MetaState& state,
                                     const Dataset& train, const Dataset& meta_set,
                                     const MetaConfig& cfg, const Matrix& gumbels) {
  cfg.validate();
  const int b = cfg.batch;
  require_shape(gumbels.rows() == b && gumbels.cols() == train.n(),
                "gumbel matrix must be batch x n");
  require_spec(cfg.inner_lr > 0.0, "hypergradient needs a resolved inner_lr");

  const Vector rho = balms::sampler::instance_rates(state.sampler, train.y);
  const SampleMatrix s = balms::sampler::gumbel_st_sample(rho, gumbels, state.sampler.tau);

  // Straight-through: the surrogate consumes the hard batch with unit
  // weights. relaxed_forward swaps in the relaxed weights s~_r[c_r], which
  // makes theta~ a smooth function of psi for finite-difference checks.
  Batch batch = balms::model::gather_batch(train.x, train.y, s.chosen);
  if (cfg.relaxed_forward) {
    batch.w.resize(b);
    for (int r = 0; r < b; ++r) batch.w[r] = s.relaxed(r, s.chosen[r]);
  }
  const ForwardCache cache = balms::model::forward_cached(p, batch.x);
  const BatchLoss bl = balms::losses::batch_loss(cfg.inner_loss, cache.logits, batch.y, batch.w);

  HypergradResult res;
  res.chosen = s.chosen;
  res.train_loss = bl.value;
  res.batch_grad = balms::model::backward(p, batch, cache, bl.dlogits);

  ModelParams tilde = surrogate_step(p, res.batch_grad, cfg.inner_lr);
  auto [mval, mgrad] =
      meta_loss_grad(cfg.second_order ? tilde : p, meta_set);
  res.meta_loss = cfg.second_order ? mval : meta_loss(tilde, meta_set);

  // a_r = < grad M, grad_theta l_r(theta) >, one single-row backward each.
  Vector a(b);
  for (int r = 0; r < b; ++r) {
    Batch one;
    one.x = batch.x.row(r);
    one.y = {batch.y[r]};
    const ForwardCache c1 = balms::model::forward_cached(p, one.x);
    const Vector dl = balms::losses::per_sample_dlogits(cfg.inner_loss,
                                                        c1.logits.row(0).transpose(), one.y[0]);
    Matrix dlog(1, dl.size());
    dlog.row(0) = dl.transpose();
    const ModelGrad gb = balms::model::backward(p, one, c1, dlog);
    a[r] = balms::model::dot(mgrad, gb);
  }

  // coef_r = -(inner_lr / B) * a_r * ds~_r[c_r]/dlog s~ pullback; with the
  // softmax Jacobian ds~_rc/dlog rho_i = (1/tau) s~_rc (delta_ci - s~_ri),
  // v_i = dM/dlog rho_i = sum_r coef_r (delta_{c_r,i} - s~_r i),
  // coef_r = -(inner_lr / (B tau)) a_r s~_r[c_r].
  const double scale = -cfg.inner_lr / (static_cast<double>(b) * state.sampler.tau);
  Vector coef(b);
  for (int r = 0; r < b; ++r) coef[r] = scale * a[r] * s.relaxed(r, s.chosen[r]);

  Vector v = Vector::Zero(train.n());
  for (int r = 0; r < b; ++r) v[s.chosen[r]] += coef[r];
  v -= s.relaxed.transpose() * coef;

  res.dpsi = balms::sampler::dpsi_from_dlogrho(state.sampler, train.y, v);
  return res;
}

inline HypergradResult hypergradient(const ModelParams& p, const MetaState& state,
                                     const Dataset& train, const Dataset& meta_set,
                                     const MetaConfig& cfg, std::uint64_t seed) {
  const Matrix gumbels = balms::sampler::draw_gumbels(cfg.batch, train.n(), seed);
  return hypergradient(p, state, train, meta_set, cfg, gumbels);
}

struct CycleRecord {
  double train_loss = 0.0;
  double meta_loss = 0.0;
  double rate_variance = 0.0;
  std::vector<int> chosen;
};

// One full sampler cycle. step_fn(params, grad) applies the trainer's real
// update; model_lr resolves cfg.inner_lr == 0.
template <typename StepFn>
CycleRecord meta_cycle(ModelParams& p, MetaState& state, const Dataset& train,
                       const Dataset& meta_set, const MetaConfig& cfg, double model_lr,
                       std::uint64_t seed, StepFn&& step_fn) {
  MetaConfig resolved = cfg;
  if (resolved.inner_lr == 0.0) resolved.inner_lr = model_lr;
  require_spec(resolved.inner_lr > 0.0, "meta cycle needs a positive inner_lr");

  const HypergradResult h =
      hypergradient(p, state, train, meta_set, resolved, seed);
  state.outer.step(state.sampler.psi, h.dpsi);

  // Real update on the same batch, recomputed through the standard batch
  // path so that a zero outer lr is bit-identical to the plain loop.
  const Batch batch = balms::model::gather_batch(train.x, train.y, h.chosen);
  const ForwardCache cache = balms::model::forward_cached(p, batch.x);
  const BatchLoss bl = balms::losses::batch_loss(resolved.inner_loss, cache.logits, batch.y);
  const ModelGrad g = balms::model::backward(p, batch, cache, bl.dlogits);
  step_fn(p, g);

  CycleRecord rec;
  rec.train_loss = bl.value;
  rec.meta_loss = h.meta_loss;
  rec.chosen = h.chosen;
  const Vector r = state.sampler.rates();
  rec.rate_variance = (r.array() - r.mean()).square().sum() / static_cast<double>(r.size());
  return rec;
}

// Meta Reweighter: same outer update, but the batch is drawn uniformly and
// psi supplies per-sample weights sigma(psi_y) instead of resampling rates.
template <typename StepFn>
CycleRecord reweighter_cycle(ModelParams& p, MetaState& state, const Dataset& train,
                             const Dataset& meta_set, const MetaConfig& cfg, double model_lr,
                             std::uint64_t seed, StepFn&& step_fn) {
  MetaConfig resolved = cfg;
  if (resolved.inner_lr == 0.0) resolved.inner_lr = model_lr;
  require_spec(resolved.inner_lr > 0.0, "meta cycle needs a positive inner_lr");

  const std::vector<int> idx =
      balms::sampler::instance_batch(train.n(), resolved.batch, seed);
  Batch batch = balms::model::gather_batch(train.x, train.y, idx);
  const int b = resolved.batch;

  const ForwardCache cache = balms::model::forward_cached(p, batch.x);

  // Weighted surrogate: theta~ = theta - lr/B sum_b w_b grad l_b, with
  // w_b = sigma(psi_{y_b}). d theta~/d psi_j = -(lr/B) sum_{b: y_b=j}
  // sigma'(psi_j) grad l_b, so dM/dpsi_j = -(lr/B) sigma'(psi_j)
  // sum_{b: y_b=j} a_b with the same a_b inner products as the sampler.
  batch.w = balms::sampler::meta_reweighter_weights(state.sampler, batch.y);
  const BatchLoss bl =
      balms::losses::batch_loss(resolved.inner_loss, cache.logits, batch.y, batch.w);
  const ModelGrad gw = balms::model::backward(p, batch, cache, bl.dlogits);

  ModelParams tilde = surrogate_step(p, gw, resolved.inner_lr);
  auto [mval, mgrad] =
      meta_loss_grad(resolved.second_order ? tilde : p, meta_set);
  const double meta_val = resolved.second_order ? mval : meta_loss(tilde, meta_set);

  Vector dpsi = Vector::Zero(state.sampler.psi.size());
  for (int r = 0; r < b; ++r) {
    Batch one;
    one.x = batch.x.row(r);
    one.y = {batch.y[r]};
    const ForwardCache c1 = balms::model::forward_cached(p, one.x);
    const Vector dl = balms::losses::per_sample_dlogits(resolved.inner_loss,
                                                        c1.logits.row(0).transpose(), one.y[0]);
    Matrix dlog(1, dl.size());
    dlog.row(0) = dl.transpose();
    const ModelGrad gb = balms::model::backward(p, one, c1, dlog);
    const double a = balms::model::dot(mgrad, gb);
    const int j = batch.y[r];
    const double s = sigmoid(state.sampler.psi[j]);
    dpsi[j] += -(resolved.inner_lr / static_cast<double>(b)) * a * s * (1.0 - s);
  }
  state.outer.step(state.sampler.psi, dpsi);

  // Real step with the updated weights.
  batch.w = balms::sampler::meta_reweighter_weights(state.sampler, batch.y);
  const BatchLoss bl2 =
      balms::losses::batch_loss(resolved.inner_loss, cache.logits, batch.y, batch.w);
  const ModelGrad g2 = balms::model::backward(p, batch, cache, bl2.dlogits);
  step_fn(p, g2);

  CycleRecord rec;
  rec.train_loss = bl2.value;
  rec.meta_loss = meta_val;
  rec.chosen = idx;
  const Vector rr = state.sampler.rates();
  rec.rate_variance = (rr.array() - rr.mean()).square().sum() / static_cast<double>(rr.size());
  return rec;
}

}  // namespace balms::meta
