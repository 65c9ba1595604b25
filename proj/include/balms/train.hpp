#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "balms/common.hpp"
#include "balms/dataset.hpp"
#include "balms/errors.hpp"
#include "balms/losses.hpp"
#include "balms/meta.hpp"
#include "balms/model.hpp"
#include "balms/optim.hpp"
#include "balms/sampler.hpp"

namespace balms::train {

using balms::datagen::Dataset;
using balms::losses::LossSpec;
using balms::meta::MetaConfig;
using balms::meta::MetaState;
using balms::model::Batch;
using balms::model::ForwardCache;
using balms::model::ModelGrad;
using balms::model::ModelParams;

enum class SamplerKind { Instance, ClassBalanced, MetaSampler, MetaReweighter };

inline bool needs_meta_set(SamplerKind s) {
  return s == SamplerKind::MetaSampler || s == SamplerKind::MetaReweighter;
}

struct TrainConfig {
  LossSpec loss;
  SamplerKind sampler = SamplerKind::Instance;
  Schedule sched;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  long iters = 2000;
  int batch = 64;
  std::vector<int> hidden;
  MetaConfig meta;
  long record_every = 100;

  void validate() const {
    sched.validate();
    require_spec(iters >= 1, "TrainConfig: iters must be >= 1");
    require_spec(batch >= 1, "TrainConfig: batch must be >= 1");
    require_spec(record_every >= 1, "TrainConfig: record_every must be >= 1");
    require_spec(momentum >= 0.0 && momentum < 1.0, "TrainConfig: momentum must be in [0, 1)");
    require_spec(weight_decay >= 0.0, "TrainConfig: weight_decay must be >= 0");
    for (int h : hidden) require_spec(h >= 1, "TrainConfig: hidden widths must be >= 1");
    if (needs_meta_set(sampler)) meta.validate();
  }
};

struct HistoryRow {
  long iter;
  double lr;
  double loss;
};

struct MetaHistoryRow {
  long iter;
  double train_loss;
  double meta_loss;
  double rate_variance;
};

struct TrainResult {
  ModelParams params;
  std::vector<HistoryRow> history;
  std::vector<MetaHistoryRow> meta_history;
  std::optional<balms::sampler::SamplerState> sampler;
};

// Core loop. Mutates params in place and returns the recorded curves.
inline TrainResult train_loop(ModelParams params, const Dataset& train_set,
                              const Dataset* meta_set, const TrainConfig& cfg,
                              std::uint64_t seed) {
  cfg.validate();
  train_set.validate();
  cfg.loss.validate(params.k());
  require_shape(params.in_dim() == train_set.d(), "train_loop: model input dim != data dim");
  require_shape(params.k() == train_set.k(), "train_loop: model classes != data classes");
  if (needs_meta_set(cfg.sampler)) {
    require_spec(meta_set != nullptr, "train_loop: this sampler needs a meta set");
    meta_set->validate();
    require_shape(meta_set->d() == train_set.d(), "train_loop: meta set dim mismatch");
    require_shape(meta_set->k() == train_set.k(), "train_loop: meta set classes mismatch");
  }

  Sgd opt;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;

  MetaState mstate = MetaState::init(params.k(), cfg.meta.outer);
  MetaConfig mcfg = cfg.meta;
  mcfg.batch = cfg.batch;
  mcfg.inner_loss = cfg.loss;

  TrainResult res;
  for (long t = 0; t < cfg.iters; ++t) {
    const double lr = cosine_lr(t, cfg.sched);
    const std::uint64_t step_seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(t));
    double loss = 0.0;

    switch (cfg.sampler) {
      case SamplerKind::Instance:
      case SamplerKind::ClassBalanced: {
        const std::vector<int> idx =
            cfg.sampler == SamplerKind::Instance
                ? balms::sampler::instance_batch(train_set.n(), cfg.batch, step_seed)
                : balms::sampler::class_balanced_batch(train_set.y, train_set.k(), cfg.batch,
                                                       step_seed);
        const Batch batch = balms::model::gather_batch(train_set.x, train_set.y, idx);
        const ForwardCache cache = balms::model::forward_cached(params, batch.x);
        const balms::losses::BatchLoss bl =
            balms::losses::batch_loss(cfg.loss, cache.logits, batch.y);
        const ModelGrad g = balms::model::backward(params, batch, cache, bl.dlogits);
        opt.step(params, g, lr);
        loss = bl.value;
        break;
      }
      case SamplerKind::MetaSampler:
      case SamplerKind::MetaReweighter: {
        auto step_fn = [&](ModelParams& p, const ModelGrad& g) { opt.step(p, g, lr); };
        const balms::meta::CycleRecord rec =
            cfg.sampler == SamplerKind::MetaSampler
                ? balms::meta::meta_cycle(params, mstate, train_set, *meta_set, mcfg, lr,
                                          step_seed, step_fn)
                : balms::meta::reweighter_cycle(params, mstate, train_set, *meta_set, mcfg, lr,
                                                step_seed, step_fn);
        loss = rec.train_loss;
        if (t % cfg.record_every == 0 || t + 1 == cfg.iters)
          res.meta_history.push_back({t, rec.train_loss, rec.meta_loss, rec.rate_variance});
        break;
      }
    }

    if (!std::isfinite(loss)) throw numeric_error("train_loop: loss diverged");
    if (t % cfg.record_every == 0 || t + 1 == cfg.iters) res.history.push_back({t, lr, loss});
  }

  if (needs_meta_set(cfg.sampler)) res.sampler = mstate.sampler;
  res.params = std::move(params);
  return res;
}

inline TrainResult train_end_to_end(const Dataset& train_set, const Dataset* meta_set,
                                    const TrainConfig& cfg, std::uint64_t seed) {
  ModelParams params =
      balms::model::init_model(train_set.d(), cfg.hidden, train_set.k(), mix_seed(seed, 7));
  return train_loop(std::move(params), train_set, meta_set, cfg, seed);
}

// Decoupled stage: keep the trained extractor frozen, retrain the classifier.
inline TrainResult train_decoupled(const ModelParams& stage1, const Dataset& train_set,
                                   const Dataset* meta_set, const TrainConfig& cfg,
                                   std::uint64_t seed) {
  require_spec(!stage1.extractor.empty(),
               "train_decoupled: stage-1 model has no extractor to freeze");
  ModelParams params = balms::model::reinit_classifier(balms::model::freeze_extractor(stage1),
                                                       mix_seed(seed, 11));
  return train_loop(std::move(params), train_set, meta_set, cfg, seed);
}

}  // namespace balms::train
