#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "trm/autodiff.hpp"

namespace trm {

// Precomputed rotary angles for positions [0, seq_len) and an even head size.
template <class T>
class RotaryTable {
 public:
  RotaryTable() = default;
  RotaryTable(std::int64_t seq_len, std::int64_t head_dim, double base);

  std::int64_t seq_len() const { return seq_len_; }
  std::int64_t head_dim() const { return head_dim_; }

  // Rotates one row in place. sign = -1 applies the inverse rotation.
  void rotate(T* row, std::int64_t position, int sign = 1) const;

 private:
  std::int64_t seq_len_ = 0;
  std::int64_t head_dim_ = 0;
  std::vector<T> cos_;
  std::vector<T> sin_;
};

// Pairwise rotation of (q, k) rows by absolute position; both [L, d_head].
template <class T>
std::pair<Tensor<T>, Tensor<T>> rotary_apply(const Tensor<T>& q, const Tensor<T>& k, double base);

// Plain rmsnorm of one vector; throws on non-finite input.
template <class T>
std::vector<T> rmsnorm(std::span<const T> v, std::span<const T> weight, double eps);

template <class T>
Var<T> add(const std::vector<Var<T>>& xs);
template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return add<T>(std::vector<Var<T>>{a, b});
}
template <class T>
Var<T> scale(const Var<T>& x, T factor);

// x [..., in] times w [in, out].
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w);

template <class T>
Var<T> rmsnorm(const Var<T>& x, const Var<T>& weight, double eps);

// silu(gate) * up, elementwise.
template <class T>
Var<T> swiglu(const Var<T>& gate, const Var<T>& up);

// out[b] = w * x[b] for x [B, L, D], w [L, L]: a linear map along the sequence axis.
template <class T>
Var<T> sequence_mix(const Var<T>& x, const Var<T>& w);

// Non-causal multi-head attention over a fused [B, L, 3D] projection with
// rotary position encoding applied to queries and keys.
template <class T>
Var<T> self_attention(const Var<T>& qkv, int n_heads, std::shared_ptr<const RotaryTable<T>> rope);

// Gathers rows of table [V, D] into out_shape (last dim D), multiplied by factor.
template <class T>
Var<T> embedding(const Var<T>& table, std::span<const std::int32_t> ids, Shape out_shape, T factor);

// [B, L, D] where every position of sample b holds table[ids[b]].
template <class T>
Var<T> broadcast_rows(const Var<T>& table, std::span<const std::int32_t> ids, std::int64_t seq_len);

// [B, L, D] -> [B, D]
template <class T>
Var<T> mean_over_sequence(const Var<T>& x);

// Stablemax cross-entropy over logits [B, L, V]; mean over positions with
// mask != 0. Throws when every position is masked out.
template <class T>
Var<T> stablemax_cross_entropy(const Var<T>& logits, std::span<const std::int32_t> targets,
                               std::span<const std::uint8_t> mask);

// Sigmoid binary cross-entropy of column `column` of logits [B, C] against
// per-sample targets in [0, 1]; mean over the batch.
template <class T>
Var<T> bce_with_logits(const Var<T>& logits, int column, std::span<const double> targets);

// Stablemax probabilities of one logit row.
std::vector<double> stablemax(std::span<const double> logits);

}  // namespace trm
