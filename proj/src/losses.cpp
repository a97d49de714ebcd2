#include "trm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trm {

std::vector<double> exact_match_flags(std::span<const std::int32_t> pred, std::span<const std::int32_t> target,
                                      std::span<const std::uint8_t> mask, std::int64_t batch) {
  if (pred.size() != target.size() || mask.size() != target.size() || batch <= 0 ||
      target.size() % static_cast<std::size_t>(batch) != 0) {
    throw std::invalid_argument("exact_match_flags: shape mismatch");
  }
  const std::size_t L = target.size() / static_cast<std::size_t>(batch);
  std::vector<double> out(static_cast<std::size_t>(batch), 1.0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t i = b * L + l;
      if (mask[i] && pred[i] != target[i]) {
        out[b] = 0.0;
        break;
      }
    }
  }
  return out;
}

template <class T>
Var<T> trm_halt_loss(const Var<T>& q_logit, std::span<const std::int32_t> y_hat, std::span<const std::int32_t> y_true,
                     std::span<const std::uint8_t> mask) {
  const auto flags = exact_match_flags(y_hat, y_true, mask, q_logit.value().dim(0));
  return bce_with_logits(q_logit, 0, flags);
}

std::vector<double> continue_targets(const std::vector<double>& next_q, const std::vector<bool>& last_step) {
  if (next_q.size() != 2 * last_step.size()) throw std::invalid_argument("continue_targets: size mismatch");
  std::vector<double> out(last_step.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    const double v = last_step[b] ? next_q[2 * b] : std::max(next_q[2 * b], next_q[2 * b + 1]);
    out[b] = 1.0 / (1.0 + std::exp(-v));
  }
  return out;
}

template <class T>
Var<T> hrm_act_losses(const Var<T>& q, std::span<const std::int32_t> y_hat, std::span<const std::int32_t> y_true,
                      std::span<const std::uint8_t> mask, const std::vector<double>& next_q,
                      const std::vector<bool>& last_step) {
  if (q.value().rank() != 2 || q.value().dim(1) != 2) throw std::invalid_argument("hrm_act_losses: q must be [B,2]");
  const auto flags = exact_match_flags(y_hat, y_true, mask, q.value().dim(0));
  const auto targets = continue_targets(next_q, last_step);
  return add(scale(bce_with_logits(q, 0, flags), T(0.5)), scale(bce_with_logits(q, 1, targets), T(0.5)));
}

std::vector<bool> halting_decision(std::span<const double> signal, Variant mode) {
  if (mode == Variant::hrm) {
    if (signal.size() % 2 != 0) throw std::invalid_argument("halting_decision: hrm signal must be [B,2]");
    std::vector<bool> out(signal.size() / 2);
    for (std::size_t b = 0; b < out.size(); ++b) out[b] = signal[2 * b] > signal[2 * b + 1];
    return out;
  }
  std::vector<bool> out(signal.size());
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = signal[b] > 0.0;
  return out;
}

template Var<float> trm_halt_loss(const Var<float>&, std::span<const std::int32_t>, std::span<const std::int32_t>,
                                  std::span<const std::uint8_t>);
template Var<double> trm_halt_loss(const Var<double>&, std::span<const std::int32_t>, std::span<const std::int32_t>,
                                   std::span<const std::uint8_t>);
template Var<float> hrm_act_losses(const Var<float>&, std::span<const std::int32_t>, std::span<const std::int32_t>,
                                   std::span<const std::uint8_t>, const std::vector<double>&, const std::vector<bool>&);
template Var<double> hrm_act_losses(const Var<double>&, std::span<const std::int32_t>, std::span<const std::int32_t>,
                                    std::span<const std::uint8_t>, const std::vector<double>&,
                                    const std::vector<bool>&);

}  // namespace trm
