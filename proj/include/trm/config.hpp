#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace trm {

// Token-mixing sublayer of a block.
enum class Arch { attention, mixer };
// Recursion schedule family.
enum class Variant { trm, hrm, single_z, multi_z };

std::string to_string(Arch a);
std::string to_string(Variant v);
Arch parse_arch(const std::string& s);
Variant parse_variant(const std::string& s);

struct NetConfig {
  int n_layers = 2;
  int hidden = 512;
  int n_heads = 8;
  double expansion = 4.0;
  // SwiGLU inner width is round(expansion * hidden * 2/3) rounded up to this multiple.
  int ffn_multiple = 256;
  Arch arch = Arch::attention;
  int vocab_size = 11;
  int seq_len = 81;
  double rope_base = 10000.0;
  double norm_eps = 1e-6;
  // Rows of the puzzle-id embedding table; 1 means a single shared vector.
  int n_puzzle_ids = 1;
  double init_std = 0.02;

  int ffn_inner() const;
  int head_dim() const { return hidden / n_heads; }
  void validate() const;  // throws std::invalid_argument
};

struct RecursionSchedule {
  Variant variant = Variant::trm;
  int n = 6;
  int T = 3;
  int n_sup = 16;

  void validate() const;
};

struct TrainConfig {
  int batch_size = 768;
  double lr = 1e-4;
  double embedding_lr = 1e-2;
  int warmup_steps = 2000;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 1.0;
  double ema_decay = 0.999;
  bool use_ema = true;
  bool halting = true;
  std::int64_t max_steps = 1000;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;
  bool log_wall_time = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);
void to_json(nlohmann::json& j, const RecursionSchedule& c);
void from_json(const nlohmann::json& j, RecursionSchedule& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace trm
