#pragma once

#include <cmath>

#include "balms/common.hpp"
#include "balms/errors.hpp"
#include "balms/model.hpp"

namespace balms::train {

struct Schedule {
  double lr_max = 0.1;
  double lr_min = 0.0;
  long warmup = 0;
  long total = 2000;

  void validate() const {
    require_spec(lr_max > 0.0, "Schedule: lr_max must be positive");
    require_spec(lr_min >= 0.0 && lr_min <= lr_max, "Schedule: need 0 <= lr_min <= lr_max");
    require_spec(total >= 1, "Schedule: total must be >= 1");
    require_spec(warmup >= 0 && warmup < total, "Schedule: warmup must be < total");
  }
};

// Linear warm-up from lr_max/2 to lr_max over [0, warmup], then cosine decay
// lr_min + (lr_max - lr_min) * (1 + cos(pi * progress)) / 2 down to lr_min.
inline double cosine_lr(long t, const Schedule& s) {
  s.validate();
  require_spec(t >= 0, "cosine_lr: t must be non-negative");
  if (t < s.warmup)
    return s.lr_max * (0.5 + 0.5 * static_cast<double>(t) / static_cast<double>(s.warmup));
  if (t >= s.total) return s.lr_min;
  const double progress =
      static_cast<double>(t - s.warmup) / static_cast<double>(s.total - s.warmup);
  return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(M_PI * progress));
}

// SGD with the usual velocity formulation: v <- mu*v + g, and a nesterov step
// theta -= lr*(g + mu*v). Weight decay is added to the raw gradient first.
// Frozen-extractor parameters are left untouched, velocity included.
struct Sgd {
  double momentum = 0.9;
  double weight_decay = 0.0;
  bool nesterov = true;
  model::ModelGrad velocity;

  void step(model::ModelParams& p, const model::ModelGrad& g, double lr) {
    if (velocity.w.size() == 0) velocity = model::zero_like(p);
    auto update = [&](auto& theta, const auto& grad, auto& vel) {
      auto geff = (grad + weight_decay * theta).eval();
      vel = momentum * vel + geff;
      if (nesterov)
        theta -= lr * (geff + momentum * vel);
      else
        theta -= lr * vel;
    };
    for (std::size_t i = 0; i < p.extractor.size(); ++i) {
      if (p.frozen_extractor) continue;
      update(p.extractor[i].w, g.extractor[i].w, velocity.extractor[i].w);
      update(p.extractor[i].b, g.extractor[i].b, velocity.extractor[i].b);
    }
    update(p.w, g.w, velocity.w);
    update(p.b, g.b, velocity.b);
  }
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam over a flat vector (the sampler's psi lives here).
struct AdamVec {
  AdamConfig cfg;
  Vector m, v;
  long t = 0;

  void step(Vector& x, const Vector& g) {
    require_shape(x.size() == g.size(), "AdamVec: gradient length mismatch");
    if (m.size() == 0) {
      m = Vector::Zero(x.size());
      v = Vector::Zero(x.size());
    }
    ++t;
    Vector geff = g + cfg.weight_decay * x;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * geff;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * geff.cwiseProduct(geff);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    x -= cfg.lr * ((m / bc1).array() / ((v / bc2).array().sqrt() + cfg.eps)).matrix();
  }
};

}  // namespace balms::train
