#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "trm/model.hpp"

namespace trm {

// Structured call counters, reported per optimization step.
struct CallCounters {
  std::int64_t net_calls_total = 0;
  std::int64_t net_calls_tracked = 0;
  std::int64_t forward_passes = 0;

  void count_net_call() {
    ++net_calls_total;
    if (grad_enabled()) ++net_calls_tracked;
  }
  CallCounters& operator+=(const CallCounters& o) {
    net_calls_total += o.net_calls_total;
    net_calls_tracked += o.net_calls_tracked;
    forward_passes += o.forward_passes;
    return *this;
  }
  friend bool operator==(const CallCounters&, const CallCounters&) = default;
};

void to_json(nlohmann::json& j, const CallCounters& c);

// Carried state between supervision steps. Always detached values.
// trm: (y, z); hrm: (y = z_H, z = z_L); single_z: z only; multi_z: y plus n z-slots.
template <class T>
struct LatentState {
  Tensor<T> y;
  Tensor<T> z;
  std::vector<Tensor<T>> z_slots;
};

template <class T>
struct StepOutput {
  LatentState<T> carry;
  Var<T> logits;
  Var<T> halt;
};

// z <- net(x, y, z) n times, then y <- net(y, z). Exactly n + 1 net calls.
template <class T>
std::pair<Var<T>, Var<T>> latent_recursion(const Model<T>& model, const Var<T>& x, Var<T> y, Var<T> z, int n,
                                           CallCounters& counters);

// T - 1 latent recursions without gradient, then one with gradient.
template <class T>
StepOutput<T> deep_recursion(const Model<T>& model, const Var<T>& x, const LatentState<T>& state,
                             const RecursionSchedule& schedule, CallCounters& counters);

// Two-network, two-frequency recursion: n*T - 2 updates without gradient,
// then one low and one high update with gradient.
template <class T>
StepOutput<T> hrm_forward(const Model<T>& model, const Var<T>& x, const LatentState<T>& state, int n, int T_cycles,
                          CallCounters& counters);

// Carries z only: each cycle runs n + 1 calls of net(x, z).
template <class T>
StepOutput<T> single_z_forward(const Model<T>& model, const Var<T>& x, const LatentState<T>& state, int n,
                               int T_cycles, CallCounters& counters);

// Carries y plus n z-slots updated in place in slot order.
template <class T>
StepOutput<T> multi_z_forward(const Model<T>& model, const Var<T>& x, const LatentState<T>& state, int n,
                              int T_cycles, CallCounters& counters);

// One full variant forward (counts one forward pass).
template <class T>
StepOutput<T> supervision_step(const Model<T>& model, const Var<T>& x, const LatentState<T>& state,
                               const RecursionSchedule& schedule, CallCounters& counters);

// Fresh state broadcast from the model's fixed initial vectors.
template <class T>
LatentState<T> initial_state(const Model<T>& model, const RecursionSchedule& schedule, std::int64_t batch);

// Overwrites sample b of `state` with the fresh initial state.
template <class T>
void reset_sample(LatentState<T>& state, const Model<T>& model, std::int64_t b);

std::int64_t effective_depth(std::int64_t T, std::int64_t n, std::int64_t n_layers);

// Tracked net calls per supervision step.
std::int64_t tracked_calls_per_step(const RecursionSchedule& schedule);

// Approximate bytes held by the gradient tape for one optimization step.
std::int64_t estimate_tape_bytes(const NetConfig& cfg, const RecursionSchedule& schedule, std::int64_t batch,
                                 std::int64_t bytes_per_scalar);

struct MemoryVerdict {
  bool fits;
  std::int64_t estimated_bytes;
  std::int64_t budget_bytes;
};

MemoryVerdict check_memory(const NetConfig& cfg, const RecursionSchedule& schedule, std::int64_t batch,
                           std::int64_t bytes_per_scalar, std::int64_t budget_bytes);

}  // namespace trm
