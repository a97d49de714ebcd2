#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trm/config.hpp"
#include "trm/ops.hpp"

namespace trm {

// Per-sample 1.0 when every unmasked position of pred equals target.
std::vector<double> exact_match_flags(std::span<const std::int32_t> pred, std::span<const std::int32_t> target,
                                      std::span<const std::uint8_t> mask, std::int64_t batch);

// Single-pass halting loss: BCE of the halt logit against exact correctness.
template <class T>
Var<T> trm_halt_loss(const Var<T>& q_logit, std::span<const std::int32_t> y_hat, std::span<const std::int32_t> y_true,
                     std::span<const std::uint8_t> mask);

// Continue target: sigmoid(next_q halt) on the last step, else sigmoid(max(next_q)).
std::vector<double> continue_targets(const std::vector<double>& next_q, const std::vector<bool>& last_step);

// Q-learning halting losses: 0.5 BCE(q_halt, exact) + 0.5 BCE(q_continue, continue target).
// next_q is [B, 2] row-major from an extra forward pass on the carried state.
template <class T>
Var<T> hrm_act_losses(const Var<T>& q, std::span<const std::int32_t> y_hat, std::span<const std::int32_t> y_true,
                      std::span<const std::uint8_t> mask, const std::vector<double>& next_q,
                      const std::vector<bool>& last_step);

// Training-time halting: single logit halts when > 0; two Q-values halt when q[0] > q[1].
std::vector<bool> halting_decision(std::span<const double> signal, Variant mode);

template <class T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.storage().begin(), t.storage().end());
}

}  // namespace trm
