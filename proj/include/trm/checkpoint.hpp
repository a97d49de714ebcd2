#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trm/train.hpp"

namespace trm {

// File layout: 8-byte magic "TRMCKPT\x01", little-endian u64 header size,
// JSON header, then the raw little-endian arrays listed in header["arrays"].
inline constexpr char kCheckpointMagic[8] = {'T', 'R', 'M', 'C', 'K', 'P', 'T', '\x01'};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointConfig {
  NetConfig net;
  RecursionSchedule schedule;
  TrainConfig train;
  Variant variant = Variant::trm;
};

nlohmann::json to_json(const CheckpointConfig& c);
CheckpointConfig checkpoint_config_from_json(const nlohmann::json& j);
// Hash of the canonical config document; embedded in every artifact.
std::string config_hash(const CheckpointConfig& c);

template <class T>
struct Checkpoint {
  CheckpointConfig config;
  std::int64_t step = 0;
  std::int64_t adam_updates = 0;
  std::vector<std::pair<std::string, Tensor<T>>> params;
  std::vector<Tensor<T>> ema;
  std::vector<Tensor<T>> adam_m;
  std::vector<Tensor<T>> adam_v;
  Tensor<T> y_init;
  Tensor<T> z_init;
  std::optional<PoolState<T>> pool;
  nlohmann::json extra;

  // Fresh model holding the stored (or EMA) weights and initial states.
  Model<T> make_model(bool use_ema) const;
};

template <class T>
Checkpoint<T> snapshot(const Trainer<T>& trainer, const CheckpointConfig& config, nlohmann::json extra = {});
template <class T>
Checkpoint<T> snapshot(const Model<T>& model, const CheckpointConfig& config, nlohmann::json extra = {});

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt);
template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// Loads optimizer, EMA, pool and step into a trainer built from the same config and data.
template <class T>
void restore_trainer(Trainer<T>& trainer, const Checkpoint<T>& ckpt);

// Header fields only: "dtype", "config", "step", "arrays", ...
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace trm
