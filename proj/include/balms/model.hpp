#pragma once

#include <cstdint>
#include <vector>

#include "balms/common.hpp"
#include "balms/errors.hpp"

namespace balms::model {

struct Batch {
  Matrix x;            // B x d
  std::vector<int> y;  // B
  Vector w;            // optional per-instance weights, empty means all ones

  long size() const { return x.rows(); }
};

inline Batch gather_batch(const Matrix& features, const std::vector<int>& labels,
                          const std::vector<int>& idx) {
  Batch b;
  b.x.resize(static_cast<long>(idx.size()), features.cols());
  b.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require_shape(idx[i] >= 0 && idx[i] < features.rows(), "gather_batch: index out of range");
    b.x.row(static_cast<long>(i)) = features.row(idx[i]);
    b.y[i] = labels[idx[i]];
  }
  return b;
}

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out
};

// ReLU MLP extractor (possibly empty) under a linear classifier. The same
// struct doubles as the gradient and optimizer-state container; gradients
// mirror the parameter shapes exactly.
struct ModelParams {
  std::vector<DenseLayer> extractor;
  Matrix w;  // k x f
  Vector b;  // k
  bool frozen_extractor = false;

  int in_dim() const { return static_cast<int>(extractor.empty() ? w.cols() : extractor.front().w.cols()); }
  int feat_dim() const { return static_cast<int>(w.cols()); }
  int k() const { return static_cast<int>(w.rows()); }
};

using ModelGrad = ModelParams;

template <class F>
inline void for_each_tensor(ModelParams& p, F&& f) {
  for (auto& layer : p.extractor) {
    f(layer.w);
    f(layer.b);
  }
  f(p.w);
  f(p.b);
}

template <class F>
inline void for_each_tensor(const ModelParams& p, F&& f) {
  for (const auto& layer : p.extractor) {
    f(layer.w);
    f(layer.b);
  }
  f(p.w);
  f(p.b);
}

template <class F>
inline void for_each_tensor(ModelParams& a, const ModelParams& b, F&& f) {
  require_shape(a.extractor.size() == b.extractor.size(), "for_each_tensor: layer count mismatch");
  for (std::size_t i = 0; i < a.extractor.size(); ++i) {
    f(a.extractor[i].w, b.extractor[i].w);
    f(a.extractor[i].b, b.extractor[i].b);
  }
  f(a.w, b.w);
  f(a.b, b.b);
}

template <class F>
inline void for_each_tensor(const ModelParams& a, const ModelParams& b, F&& f) {
  require_shape(a.extractor.size() == b.extractor.size(), "for_each_tensor: layer count mismatch");
  for (std::size_t i = 0; i < a.extractor.size(); ++i) {
    f(a.extractor[i].w, b.extractor[i].w);
    f(a.extractor[i].b, b.extractor[i].b);
  }
  f(a.w, b.w);
  f(a.b, b.b);
}

inline ModelGrad zero_like(const ModelParams& p) {
  ModelGrad g = p;
  for_each_tensor(g, [](auto& t) { t.setZero(); });
  g.frozen_extractor = false;
  return g;
}

// p += a * g
inline void add_scaled(ModelParams& p, const ModelGrad& g, double a) {
  for_each_tensor(p, g, [a](auto& x, const auto& y) {
    require_shape(x.rows() == y.rows() && x.cols() == y.cols(), "add_scaled: shape mismatch");
    x += a * y;
  });
}

inline double dot(const ModelGrad& a, const ModelGrad& b) {
  double acc = 0.0;
  for_each_tensor(a, b, [&acc](const auto& x, const auto& y) {
    require_shape(x.rows() == y.rows() && x.cols() == y.cols(), "dot: shape mismatch");
    acc += (x.array() * y.array()).sum();
  });
  return acc;
}

inline long param_count(const ModelParams& p) {
  long n = 0;
  for_each_tensor(p, [&n](const auto& t) { n += t.size(); });
  return n;
}

// Weights uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline ModelParams init_model(int d, const std::vector<int>& hidden, int k, std::uint64_t seed) {
  require_spec(d >= 1 && k >= 1, "init_model: d and k must be >= 1");
  for (int h : hidden) require_spec(h >= 1, "init_model: hidden widths must be >= 1");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto fill = [&](Matrix& m, int fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (long r = 0; r < m.rows(); ++r)
      for (long c = 0; c < m.cols(); ++c) m(r, c) = scale * unif(rng);
  };
  ModelParams p;
  int in = d;
  for (int h : hidden) {
    DenseLayer layer{Matrix(h, in), Vector::Zero(h)};
    fill(layer.w, in);
    p.extractor.push_back(std::move(layer));
    in = h;
  }
  p.w.resize(k, in);
  fill(p.w, in);
  p.b = Vector::Zero(k);
  return p;
}

inline ModelParams freeze_extractor(ModelParams p) {
  p.frozen_extractor = true;
  return p;
}

inline ModelParams reinit_classifier(ModelParams p, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.feat_dim()));
  for (long r = 0; r < p.w.rows(); ++r)
    for (long c = 0; c < p.w.cols(); ++c) p.w(r, c) = scale * unif(rng);
  p.b.setZero();
  return p;
}

struct ForwardCache {
  std::vector<Matrix> acts;  // acts[0] = input, acts[i] = output of layer i (post ReLU)
  Matrix logits;             // B x k
};

inline ForwardCache forward_cached(const ModelParams& p, const Matrix& x) {
  require_shape(x.cols() == p.in_dim(), "forward: input dimension mismatch");
  ForwardCache cache;
  cache.acts.reserve(p.extractor.size() + 1);
  cache.acts.push_back(x);
  for (const auto& layer : p.extractor) {
    Matrix z = (cache.acts.back() * layer.w.transpose()).rowwise() + layer.b.transpose();
    cache.acts.push_back(z.cwiseMax(0.0));
  }
  cache.logits = (cache.acts.back() * p.w.transpose()).rowwise() + p.b.transpose();
  return cache;
}

inline Matrix forward(const ModelParams& p, const Matrix& x) {
  return forward_cached(p, x).logits;
}

inline Matrix features(const ModelParams& p, const Matrix& x) {
  require_shape(x.cols() == p.in_dim(), "features: input dimension mismatch");
  Matrix a = x;
  for (const auto& layer : p.extractor)
    a = ((a * layer.w.transpose()).rowwise() + layer.b.transpose()).cwiseMax(0.0);
  return a;
}

// Reverse-mode gradients of sum_i w_i <dlogits_i, logits_i>. A frozen
// extractor yields exactly zero gradients for its tensors.
inline ModelGrad backward(const ModelParams& p, const Batch& batch, const ForwardCache& cache,
                          const Matrix& dlogits) {
  const long bsz = batch.size();
  require_shape(dlogits.rows() == bsz && dlogits.cols() == p.k(), "backward: dlogits shaped B x k");
  require_shape(cache.acts.front().rows() == bsz, "backward: cache batch mismatch");
  require_shape(batch.w.size() == 0 || batch.w.size() == bsz, "backward: weights length != batch");
  Matrix d = dlogits;
  if (batch.w.size()) d.array().colwise() *= batch.w.array();
  ModelGrad g = zero_like(p);
  g.w = d.transpose() * cache.acts.back();
  g.b = d.colwise().sum().transpose();
  if (!p.extractor.empty() && !p.frozen_extractor) {
    Matrix da = d * p.w;
    for (int i = static_cast<int>(p.extractor.size()) - 1; i >= 0; --i) {
      const Matrix dz =
          (da.array() * (cache.acts[i + 1].array() > 0.0).cast<double>()).matrix();
      g.extractor[i].w = dz.transpose() * cache.acts[i];
      g.extractor[i].b = dz.colwise().sum().transpose();
      if (i > 0) da = dz * p.extractor[i].w;
    }
  }
  return g;
}

}  // namespace balms::model
