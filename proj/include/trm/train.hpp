#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trm/data/dataset.hpp"
#include "trm/losses.hpp"
#include "trm/optim.hpp"
#include "trm/recursion.hpp"

namespace trm {

// Per optimization step record written to the metrics stream.
struct StepMetrics {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss_answer = 0.0;
  double loss_halt = 0.0;
  double train_exact_match = 0.0;
  // Mean supervision steps over samples retired so far.
  double mean_sup_steps = 0.0;
  std::int64_t samples_retired = 0;
  CallCounters net_calls;
  bool skipped = false;
  std::optional<double> wall_ms;
};

nlohmann::json to_json(const StepMetrics& m);

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything besides the model and optimizer needed to resume bitwise.
template <class T>
struct PoolState {
  std::vector<std::int64_t> slot_example;  // dataset index held by each slot
  std::vector<int> slot_steps;             // supervision steps taken on it
  LatentState<T> carry;
  std::vector<std::int64_t> order;  // current epoch permutation
  std::int64_t cursor = 0;
  std::int64_t epoch = 0;
  std::int64_t retired = 0;
  std::int64_t retired_steps = 0;
  std::string rng_state;
};

// Deep-supervision trainer over a persistent pool of batch_size slots.
template <class T>
class Trainer {
 public:
  Trainer(Model<T>& model, const RecursionSchedule& schedule, const TrainConfig& cfg, const data::TokenDataset& data);

  // One optimization step. Throws NonFiniteLoss on a non-finite loss.
  StepMetrics step();
  // Runs until max_steps, calling `on_step` after each step.
  void run(const std::function<void(const StepMetrics&)>& on_step = {});

  std::int64_t steps_done() const { return step_; }
  Model<T>& model() { return model_; }
  const Model<T>& model() const { return model_; }
  AdamW<T>& optimizer() { return optimizer_; }
  const AdamW<T>& optimizer() const { return optimizer_; }
  Ema<T>& ema() { return ema_; }
  const Ema<T>& ema() const { return ema_; }
  const RecursionSchedule& schedule() const { return schedule_; }
  const TrainConfig& config() const { return cfg_; }

  PoolState<T> pool_state() const;
  void restore(const PoolState<T>& state, std::int64_t step);

  // Model with the evaluation weights (EMA shadow when enabled).
  Model<T> eval_model() const;

 private:
  std::int64_t next_example();
  void refill(std::size_t slot);

  Model<T>& model_;
  RecursionSchedule schedule_;
  TrainConfig cfg_;
  const data::TokenDataset& data_;
  AdamW<T> optimizer_;
  Ema<T> ema_;
  std::mt19937_64 rng_;
  std::vector<std::int64_t> order_;
  std::int64_t cursor_ = 0;
  std::int64_t epoch_ = 0;
  std::vector<std::int64_t> slot_example_;
  std::vector<int> slot_steps_;
  LatentState<T> carry_;
  std::int64_t step_ = 0;
  std::int64_t retired_ = 0;
  std::int64_t retired_steps_ = 0;
};

AdamWConfig adamw_config(const TrainConfig& cfg);

}  // namespace trm
