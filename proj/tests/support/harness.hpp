#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "trm/losses.hpp"
#include "trm/model.hpp"
#include "trm/ops.hpp"
#include "trm/recursion.hpp"

namespace trm::testing {

// A fixed batch of tokens, ids and targets for a model config.
struct Batch {
  std::int64_t size = 0;
  std::vector<std::int32_t> tokens, targets, ids;
  std::vector<std::uint8_t> mask;
};

inline Batch random_batch(const NetConfig& cfg, std::int64_t B, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tok(0, cfg.vocab_size - 1), id(0, cfg.n_puzzle_ids - 1);
  Batch b;
  b.size = B;
  for (std::int64_t i = 0; i < B * cfg.seq_len; ++i) {
    b.tokens.push_back(tok(rng));
    b.targets.push_back(tok(rng));
    b.mask.push_back(1);
  }
  for (std::int64_t i = 0; i < B; ++i) b.ids.push_back(id(rng));
  return b;
}

// Replaces every parameter (norm weights and zero-initialized heads included)
// with random values so no gradient is trivially zero.
template <class T>
void randomize(Model<T>& model, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& e : model.params().entries()) {
    const bool norm = e.name.find("norm") != std::string::npos;
    for (auto& v : e.var.mutable_value().storage()) v = static_cast<T>(norm ? 1.0 + nd(rng) : nd(rng));
  }
}

// Answer plus halting loss for one trm supervision step, optionally with the
// no-grad prefix replaced by precomputed constants (y, z after T - 1 cycles).
template <class T>
Var<T> trm_step_loss(const Model<T>& model, const Batch& b, const LatentState<T>& state,
                     const RecursionSchedule& schedule, const LatentState<T>* frozen_prefix = nullptr) {
  CallCounters counters;
  const Var<T> x = model.embed_input(b.tokens, b.ids);
  Var<T> logits, halt;
  if (frozen_prefix) {
    auto [y, z] = latent_recursion(model, x, Var<T>::constant(frozen_prefix->y), Var<T>::constant(frozen_prefix->z),
                                   schedule.n, counters);
    logits = model.output_head(y);
    halt = model.halt_head(y);
  } else {
    auto out = supervision_step(model, x, state, schedule, counters);
    logits = out.logits;
    halt = out.halt;
  }
  const auto y_hat = decode(logits.value());
  const auto ce = stablemax_cross_entropy(logits, b.targets, b.mask);
  return add(ce, trm_halt_loss(halt, std::span<const std::int32_t>(y_hat), b.targets, b.mask));
}

// (y, z) after the T - 1 gradient-free cycles of deep recursion.
template <class T>
LatentState<T> trm_prefix(const Model<T>& model, const Batch& b, const LatentState<T>& state,
                          const RecursionSchedule& schedule) {
  NoGradGuard no_grad;
  CallCounters counters;
  const Var<T> x = model.embed_input(b.tokens, b.ids);
  Var<T> y = Var<T>::constant(state.y), z = Var<T>::constant(state.z);
  for (int j = 0; j < schedule.T - 1; ++j) std::tie(y, z) = latent_recursion(model, x, y, z, schedule.n, counters);
  return {y.value(), z.value(), {}};
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::int64_t checked = 0;
  std::string worst;
};

// |a - b| / max(|a|, |b|, floor): the floor keeps near-zero gradients from
// turning rounding noise into large relative errors.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences of `loss()` against the gradients currently stored on
// the model's parameters, over every element (or every `stride`-th).
template <class F>
GradCheck finite_difference_check(Model<double>& model, F&& loss, double h = 1e-5, std::int64_t stride = 1) {
  GradCheck r;
  std::vector<Tensor<double>> analytic;
  for (const auto& e : model.params().entries()) analytic.push_back(e.var.grad());
  NoGradGuard no_grad;
  std::size_t pi = 0;
  for (auto& e : model.params().entries()) {
    auto& values = e.var.mutable_value().storage();
    for (std::size_t i = 0; i < values.size(); i += static_cast<std::size_t>(stride)) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss().value()[0];
      values[i] = saved - h;
      const double down = loss().value()[0];
      values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = rel_error(analytic[pi][static_cast<std::int64_t>(i)], numeric);
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = e.name + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
    ++pi;
  }
  return r;
}

template <class T>
std::vector<Tensor<T>> param_grads(const Model<T>& model) {
  std::vector<Tensor<T>> out;
  for (const auto& e : model.params().entries()) out.push_back(e.var.grad());
  return out;
}

}  // namespace trm::testing
