#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trm/config.hpp"
#include "trm/ops.hpp"

namespace trm {

// Optimizer treatment of a parameter.
enum class ParamGroup { decay, no_decay, puzzle_embedding };

std::string to_string(ParamGroup g);

// Named learnable arrays in registration order. Every Var is a leaf.
template <class T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
    ParamGroup group;
  };

  Var<T>& add(const std::string& name, Tensor<T> init, ParamGroup group);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Var<T>& at(const std::string& name);
  const Var<T>& at(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t element_count() const;

  void zero_grad();
  // Order-sensitive hash of every value, for checking that weights are (un)changed.
  std::string values_hash() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

template <class T>
struct BlockParams {
  Var<T> norm_mix;
  Var<T> qkv;       // attention only, [D, 3D]
  Var<T> attn_out;  // attention only, [D, D]
  Var<T> mix;       // mixer only, [L, L]
  Var<T> norm_mlp;
  Var<T> gate;  // [D, I]
  Var<T> up;    // [D, I]
  Var<T> down;  // [I, D]
};

template <class T>
struct NetParams {
  std::vector<BlockParams<T>> blocks;
  Var<T> final_norm;
};

// Pre-norm residual block: h + mix(rmsnorm(h)), then h + swiglu_mlp(rmsnorm(h)).
template <class T>
Var<T> block_forward(const Var<T>& h, const NetConfig& cfg, const BlockParams<T>& params,
                     const std::shared_ptr<const RotaryTable<T>>& rope);

// Sums the inputs, applies the blocks, then a final rmsnorm.
template <class T>
Var<T> net_forward(std::span<const Var<T>> inputs, const NetConfig& cfg, const NetParams<T>& params,
                   const std::shared_ptr<const RotaryTable<T>>& rope, std::size_t max_inputs = 3);

// Per-position argmax, lowest id wins ties. Returns [B*L] tokens.
template <class T>
std::vector<std::int32_t> decode(const Tensor<T>& logits);

// Learnable element count of a model built from cfg for the given recursion variant.
std::int64_t param_count(const NetConfig& cfg, Variant variant = Variant::trm);

enum class NetRole { shared, low, high };

template <class T>
class Model {
 public:
  Model(const NetConfig& cfg, Variant variant, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  // Deep copy: fresh parameter nodes holding equal values.
  Model clone() const;

  const NetConfig& config() const { return cfg_; }
  Variant variant() const { return variant_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // tokens is [B*L] row-major; puzzle_ids is [B].
  Var<T> embed_input(std::span<const std::int32_t> tokens, std::span<const std::int32_t> puzzle_ids) const;
  Var<T> net(std::span<const Var<T>> inputs, NetRole role = NetRole::shared) const;
  Var<T> net(std::initializer_list<Var<T>> inputs, NetRole role = NetRole::shared) const {
    const std::vector<Var<T>> v(inputs);
    return net(std::span<const Var<T>>(v), role);
  }
  Var<T> output_head(const Var<T>& y) const;
  // [B, 1] for single-logit variants, [B, 2] (halt, continue) for hrm.
  Var<T> halt_head(const Var<T>& y) const;

  const Tensor<T>& y_init() const { return y_init_; }
  const Tensor<T>& z_init() const { return z_init_; }
  void set_initial_states(Tensor<T> y_init, Tensor<T> z_init);
  // init [D] repeated over [B, L, D].
  Tensor<T> broadcast_state(const Tensor<T>& init, std::int64_t batch) const;

  const NetParams<T>& net_params(NetRole role) const;
  const std::shared_ptr<const RotaryTable<T>>& rope() const { return rope_; }

 private:
  void bind();

  NetConfig cfg_;
  Variant variant_;
  ParamStore<T> params_;
  NetParams<T> shared_;
  NetParams<T> low_;
  NetParams<T> high_;
  Tensor<T> y_init_;
  Tensor<T> z_init_;
  std::shared_ptr<const RotaryTable<T>> rope_;
};

// Truncated (+-2 sigma) normal fill.
template <class T>
Tensor<T> truncated_normal(Shape shape, double std, std::mt19937_64& rng);

}  // namespace trm
