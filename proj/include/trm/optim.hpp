#pragma once

#include <cstdint>
#include <vector>

#include "trm/model.hpp"

namespace trm {

struct AdamWConfig {
  double lr = 1e-4;
  double embedding_lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 1.0;
  int warmup_steps = 2000;
};

// Linear warmup factor min(1, step / warmup) for a 1-based step index.
double warmup_factor(std::int64_t step, int warmup_steps);

// Decoupled weight decay Adam. Parameters in the decay group get
// weight_decay; norm weights and token embeddings get none; puzzle-id
// embeddings use embedding_lr without decay.
template <class T>
class AdamW {
 public:
  AdamW(const ParamStore<T>& params, AdamWConfig cfg);

  // Applies one update with lr scaled by warmup_factor(step). Returns false
  // and leaves everything untouched when any gradient is non-finite.
  bool step(ParamStore<T>& params, std::int64_t step);

  double lr_at(std::int64_t step, ParamGroup group) const;
  double weight_decay_for(ParamGroup group) const;
  const AdamWConfig& config() const { return cfg_; }

  std::int64_t updates() const { return t_; }
  // Elements touched by the last successful update.
  std::int64_t last_updated_elements() const { return last_updated_; }

  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }
  void set_updates(std::int64_t t) { t_ = t; }

 private:
  AdamWConfig cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t t_ = 0;
  std::int64_t last_updated_ = 0;
};

// shadow <- decay * shadow + (1 - decay) * params
template <class T>
void ema_update(Tensor<T>& shadow, const Tensor<T>& params, double decay);

template <class T>
class Ema {
 public:
  Ema(const ParamStore<T>& params, double decay);

  void update(const ParamStore<T>& params);
  // Copies the shadow arrays into a congruent store.
  void copy_to(ParamStore<T>& params) const;

  double decay() const { return decay_; }
  std::vector<Tensor<T>>& shadow() { return shadow_; }
  const std::vector<Tensor<T>>& shadow() const { return shadow_; }
  std::string shadow_hash(const ParamStore<T>& names) const;

 private:
  double decay_;
  std::vector<Tensor<T>> shadow_;
};

}  // namespace trm
