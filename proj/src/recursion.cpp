#include "trm/recursion.hpp"

#include <stdexcept>

namespace trm {

void to_json(nlohmann::json& j, const CallCounters& c) {
  j = {{"net_calls_total", c.net_calls_total},
       {"net_calls_tracked", c.net_calls_tracked},
       {"forward_passes", c.forward_passes}};
}

namespace {

template <class T>
Var<T> call_net(const Model<T>& model, std::vector<Var<T>> inputs, CallCounters& counters,
                NetRole role = NetRole::shared) {
  counters.count_net_call();
  return model.net(std::span<const Var<T>>(inputs), role);
}

template <class T>
StepOutput<T> finish(const Model<T>& model, const Var<T>& answer, LatentState<T> carry) {
  StepOutput<T> out;
  out.carry = std::move(carry);
  out.logits = model.output_head(answer);
  out.halt = model.halt_head(answer);
  return out;
}

}  // namespace

template <class T>
std::pair<Var<T>, Var<T>> latent_recursion(const Model<T>& model, const Var<T>& x, Var<T> y, Var<T> z, int n,
                                           CallCounters& counters) {
  for (int i = 0; i < n; ++i) z = call_net(model, {x, y, z}, counters);
  y = call_net(model, {y, z}, counters);
  return {y, z};
}

template <class T>
StepOutput<T> deep_recursion(const Model<T>& model, const Var<T>& x, const LatentState<T>& state,
                             const RecursionSchedule& schedule, CallCounters& counters) {
  if (schedule.variant != Variant::trm) throw std::invalid_argument("deep_recursion requires the trm variant");
  // Incoming state enters as constants, whatever its origin.
  Var<T> y = Var<T>::constant(state.y);
  Var<T> z = Var<T>::constant(state.z);
  {
    NoGradGuard no_grad;
    for (int j = 0; j < schedule.T - 1; ++j) std::tie(y, z) = latent_recursion(model, x, y, z, schedule.n, counters);
  }
  std::tie(y, z) = latent_recursion(model, x, y, z, schedule.n, counters);
  return finish(model, y, LatentState<T>{y.value(), z.value(), {}});
}

template <class T>
StepOutput<T> hrm_forward(const Model<T>& model, const Var<T>& x, const LatentState<T>& state, int n, int T_cycles,
                          CallCounters& counters) {
  if (model.variant() != Variant::hrm) throw std::invalid_argument("hrm_forward requires an hrm model");
  Var<T> z_high = Var<T>::constant(state.y);
  Var<T> z_low = Var<T>::constant(state.z);
  {
    NoGradGuard no_grad;
    for (int i = 0; i < n * T_cycles - 1; ++i) {
      z_low = call_net(model, {z_low, z_high, x}, counters, NetRole::low);
      if ((i + 1) % n == 0) z_high = call_net(model, {z_high, z_low}, counters, NetRole::high);
    }
  }
  z_low = call_net(model, {z_low, z_high, x}, counters, NetRole::low);
  z_high = call_net(model, {z_high, z_low}, counters, NetRole::high);
  return finish(model, z_high, LatentState<T>{z_high.value(), z_low.value(), {}});
}

template <class T>
StepOutput<T> single_z_forward(const Model<T>& model, const Var<T>& x, const LatentState<T>& state, int n,
                               int T_cycles, CallCounters& counters) {
  Var<T> z = Var<T>::constant(state.z);
  auto cycle = [&] {
    for (int i = 0; i < n + 1; ++i) z = call_net(model, {x, z}, counters);
  };
  {
    NoGradGuard no_grad;
    for (int j = 0; j < T_cycles - 1; ++j) cycle();
  }
  cycle();
  return finish(model, z, LatentState<T>{Tensor<T>(), z.value(), {}});
}

template <class T>
StepOutput<T> multi_z_forward(const Model<T>& model, const Var<T>& x, const LatentState<T>& state, int n,
                              int T_cycles, CallCounters& counters) {
  if (static_cast<int>(state.z_slots.size()) != n) {
    throw std::invalid_argument("multi_z_forward: expected " + std::to_string(n) + " latent slots, got " +
                                std::to_string(state.z_slots.size()));
  }
  Var<T> y = Var<T>::constant(state.y);
  std::vector<Var<T>> slots;
  for (const auto& s : state.z_slots) slots.push_back(Var<T>::constant(s));
  auto cycle = [&] {
    for (int i = 0; i < n; ++i) {
      std::vector<Var<T>> inputs{x, y};
      inputs.insert(inputs.end(), slots.begin(), slots.end());
      slots[static_cast<std::size_t>(i)] = call_net(model, std::move(inputs), counters);
    }
    std::vector<Var<T>> inputs{y};
    inputs.insert(inputs.end(), slots.begin(), slots.end());
    y = call_net(model, std::move(inputs), counters);
  };
  {
    NoGradGuard no_grad;
    for (int j = 0; j < T_cycles - 1; ++j) cycle();
  }
  cycle();
  LatentState<T> carry{y.value(), Tensor<T>(), {}};
  for (const auto& s : slots) carry.z_slots.push_back(s.value());
  return finish(model, y, std::move(carry));
}

template <class T>
StepOutput<T> supervision_step(const Model<T>& model, const Var<T>& x, const LatentState<T>& state,
                               const RecursionSchedule& schedule, CallCounters& counters) {
  if (model.variant() != schedule.variant) {
    throw std::invalid_argument("model variant " + to_string(model.variant()) + " does not match schedule variant " +
                                to_string(schedule.variant));
  }
  ++counters.forward_passes;
  switch (schedule.variant) {
    case Variant::trm: return deep_recursion(model, x, state, schedule, counters);
    case Variant::hrm: return hrm_forward(model, x, state, schedule.n, schedule.T, counters);
    case Variant::single_z: return single_z_forward(model, x, state, schedule.n, schedule.T, counters);
    case Variant::multi_z: return multi_z_forward(model, x, state, schedule.n, schedule.T, counters);
  }
  throw std::logic_error("unreachable");
}

template <class T>
LatentState<T> initial_state(const Model<T>& model, const RecursionSchedule& schedule, std::int64_t batch) {
  LatentState<T> s;
  switch (schedule.variant) {
    case Variant::trm:
    case Variant::hrm:
      s.y = model.broadcast_state(model.y_init(), batch);
      s.z = model.broadcast_state(model.z_init(), batch);
      break;
    case Variant::single_z:
      s.z = model.broadcast_state(model.z_init(), batch);
      break;
    case Variant::multi_z:
      s.y = model.broadcast_state(model.y_init(), batch);
      for (int i = 0; i < schedule.n; ++i) s.z_slots.push_back(model.broadcast_state(model.z_init(), batch));
      break;
  }
  return s;
}

template <class T>
void reset_sample(LatentState<T>& state, const Model<T>& model, std::int64_t b) {
  const std::int64_t L = model.config().seq_len, D = model.config().hidden;
  auto reset = [&](Tensor<T>& t, const Tensor<T>& init) {
    if (t.empty()) return;
    for (std::int64_t l = 0; l < L; ++l) std::copy(init.data(), init.data() + D, t.data() + (b * L + l) * D);
  };
  reset(state.y, model.y_init());
  reset(state.z, model.z_init());
  for (auto& s : state.z_slots) reset(s, model.z_init());
}

std::int64_t effective_depth(std::int64_t T, std::int64_t n, std::int64_t n_layers) {
  if (T < 1 || n < 1 || n_layers < 1) throw std::invalid_argument("effective_depth: arguments must be positive");
  return T * (n + 1) * n_layers;
}

std::int64_t tracked_calls_per_step(const RecursionSchedule& schedule) {
  return schedule.variant == Variant::hrm ? 2 : schedule.n + 1;
}

std::int64_t estimate_tape_bytes(const NetConfig& cfg, const RecursionSchedule& schedule, std::int64_t batch,
                                 std::int64_t bytes_per_scalar) {
  const std::int64_t BL = batch * cfg.seq_len;
  const std::int64_t D = cfg.hidden, I = cfg.ffn_inner(), V = cfg.vocab_size;
  // Values kept alive by one block: normed input, mixing output, two residual
  // sums, the mlp norm, gate/up/activation and down projection.
  std::int64_t block = BL * (6 * D + 3 * I);
  if (cfg.arch == Arch::attention) {
    // fused qkv, rotated q/k copies, attention output, softmax probabilities
    block += BL * 6 * D + batch * cfg.n_heads * cfg.seq_len * cfg.seq_len;
  }
  const std::int64_t per_call = cfg.n_layers * block + 2 * BL * D;
  const std::int64_t heads = BL * (2 * D + 2 * V);
  return (tracked_calls_per_step(schedule) * per_call + heads) * bytes_per_scalar;
}

MemoryVerdict check_memory(const NetConfig& cfg, const RecursionSchedule& schedule, std::int64_t batch,
                           std::int64_t bytes_per_scalar, std::int64_t budget_bytes) {
  const auto est = estimate_tape_bytes(cfg, schedule, batch, bytes_per_scalar);
  return {est <= budget_bytes, est, budget_bytes};
}

#define TRM_INSTANTIATE_RECURSION(T)                                                                              \
  template std::pair<Var<T>, Var<T>> latent_recursion(const Model<T>&, const Var<T>&, Var<T>, Var<T>, int,       \
                                                      CallCounters&);                                             \
  template StepOutput<T> deep_recursion(const Model<T>&, const Var<T>&, const LatentState<T>&,                   \
                                        const RecursionSchedule&, CallCounters&);                                 \
  template StepOutput<T> hrm_forward(const Model<T>&, const Var<T>&, const LatentState<T>&, int, int,            \
                                     CallCounters&);                                                              \
  template StepOutput<T> single_z_forward(const Model<T>&, const Var<T>&, const LatentState<T>&, int, int,       \
                                          CallCounters&);                                                         \
  template StepOutput<T> multi_z_forward(const Model<T>&, const Var<T>&, const LatentState<T>&, int, int,        \
                                         CallCounters&);                                                          \
  template StepOutput<T> supervision_step(const Model<T>&, const Var<T>&, const LatentState<T>&,                 \
                                          const RecursionSchedule&, CallCounters&);                               \
  template LatentState<T> initial_state(const Model<T>&, const RecursionSchedule&, std::int64_t);                \
  template void reset_sample(LatentState<T>&, const Model<T>&, std::int64_t);

TRM_INSTANTIATE_RECURSION(float)
TRM_INSTANTIATE_RECURSION(double)

}  // namespace trm
