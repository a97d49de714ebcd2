#include "trm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace trm {

nlohmann::json to_json(const StepMetrics& m) {
  nlohmann::json j = {{"step", m.step},
                      {"lr", m.lr},
                      {"loss_answer", m.loss_answer},
                      {"loss_halt", m.loss_halt},
                      {"train_exact_match", m.train_exact_match},
                      {"mean_sup_steps", m.mean_sup_steps},
                      {"samples_retired", m.samples_retired},
                      {"net_calls", m.net_calls},
                      {"skipped", m.skipped}};
  if (m.wall_ms) j["wall_ms"] = *m.wall_ms;
  return j;
}

AdamWConfig adamw_config(const TrainConfig& cfg) {
  AdamWConfig a;
  a.lr = cfg.lr;
  a.embedding_lr = cfg.embedding_lr;
  a.beta1 = cfg.beta1;
  a.beta2 = cfg.beta2;
  a.eps = cfg.adam_eps;
  a.weight_decay = cfg.weight_decay;
  a.warmup_steps = cfg.warmup_steps;
  return a;
}

template <class T>
Trainer<T>::Trainer(Model<T>& model, const RecursionSchedule& schedule, const TrainConfig& cfg,
                    const data::TokenDataset& data)
    : model_(model),
      schedule_(schedule),
      cfg_(cfg),
      data_(data),
      optimizer_(model.params(), adamw_config(cfg)),
      ema_(model.params(), cfg.ema_decay),
      rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
  schedule_.validate();
  cfg_.validate();
  if (data_.empty()) throw std::invalid_argument("training set is empty");
  if (data_.seq_len != model.config().seq_len || data_.vocab_size != model.config().vocab_size) {
    throw std::invalid_argument("dataset (L=" + std::to_string(data_.seq_len) + ", V=" +
                                std::to_string(data_.vocab_size) + ") does not match the model config");
  }
  if (data_.n_puzzle_ids > model.config().n_puzzle_ids) {
    throw std::invalid_argument("dataset needs more puzzle-id embeddings than the model has");
  }
  if (model.variant() != schedule_.variant) throw std::invalid_argument("model and schedule variants differ");
  const auto B = static_cast<std::size_t>(cfg_.batch_size);
  order_.resize(data_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_);
  slot_example_.resize(B);
  slot_steps_.assign(B, 0);
  carry_ = initial_state(model_, schedule_, cfg_.batch_size);
  for (std::size_t b = 0; b < B; ++b) slot_example_[b] = next_example();
}

template <class T>
std::int64_t Trainer<T>::next_example() {
  if (cursor_ >= static_cast<std::int64_t>(order_.size())) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
    ++epoch_;
  }
  return order_[static_cast<std::size_t>(cursor_++)];
}

template <class T>
void Trainer<T>::refill(std::size_t slot) {
  slot_example_[slot] = next_example();
  slot_steps_[slot] = 0;
  reset_sample(carry_, model_, static_cast<std::int64_t>(slot));
}

template <class T>
StepMetrics Trainer<T>::step() {
  const auto started = std::chrono::steady_clock::now();
  const std::int64_t B = cfg_.batch_size, L = data_.seq_len;
  std::vector<std::int32_t> tokens(static_cast<std::size_t>(B * L)), targets(tokens.size());
  std::vector<std::uint8_t> mask(tokens.size());
  std::vector<std::int32_t> ids(static_cast<std::size_t>(B));
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& ex = data_.examples[static_cast<std::size_t>(slot_example_[static_cast<std::size_t>(b)])];
    std::copy(ex.input.begin(), ex.input.end(), tokens.begin() + b * L);
    std::copy(ex.target.begin(), ex.target.end(), targets.begin() + b * L);
    std::copy(ex.mask.begin(), ex.mask.end(), mask.begin() + b * L);
    ids[static_cast<std::size_t>(b)] = ex.embedding_id;
  }

  StepMetrics metrics;
  Var<T> x = model_.embed_input(tokens, ids);
  StepOutput<T> out = supervision_step(model_, x, carry_, schedule_, metrics.net_calls);
  Var<T> loss_answer = stablemax_cross_entropy(out.logits, targets, mask);
  const auto pred = decode(out.logits.value());
  Var<T> loss_halt;
  if (schedule_.variant == Variant::hrm) {
    std::vector<bool> last(static_cast<std::size_t>(B));
    for (std::size_t b = 0; b < last.size(); ++b) last[b] = slot_steps_[b] + 1 >= schedule_.n_sup;
    std::vector<double> next_q;
    {
      NoGradGuard no_grad;
      const auto next = supervision_step(model_, x.detach(), out.carry, schedule_, metrics.net_calls);
      next_q = to_doubles(next.halt.value());
    }
    loss_halt = hrm_act_losses(out.halt, pred, targets, mask, next_q, last);
  } else {
    loss_halt = trm_halt_loss(out.halt, pred, targets, mask);
  }
  metrics.loss_answer = static_cast<double>(loss_answer.value()[0]);
  metrics.loss_halt = static_cast<double>(loss_halt.value()[0]);
  if (!std::isfinite(metrics.loss_answer) || !std::isfinite(metrics.loss_halt)) {
    throw NonFiniteLoss("non-finite loss at step " + std::to_string(step_ + 1) +
                        " (answer=" + std::to_string(metrics.loss_answer) +
                        ", halt=" + std::to_string(metrics.loss_halt) + ")");
  }
  const auto flags = exact_match_flags(pred, targets, mask, B);
  metrics.train_exact_match = std::accumulate(flags.begin(), flags.end(), 0.0) / static_cast<double>(B);

  model_.params().zero_grad();
  backward(add(loss_answer, loss_halt));
  ++step_;
  metrics.step = step_;
  metrics.lr = optimizer_.lr_at(step_, ParamGroup::decay);
  metrics.skipped = !optimizer_.step(model_.params(), step_);
  if (!metrics.skipped && cfg_.use_ema) ema_.update(model_.params());
  model_.params().zero_grad();

  carry_ = std::move(out.carry);
  const auto signal = to_doubles(out.halt.value());
  const auto halt = halting_decision(signal, schedule_.variant == Variant::hrm ? Variant::hrm : Variant::trm);
  for (std::size_t b = 0; b < slot_steps_.size(); ++b) {
    ++slot_steps_[b];
    if ((cfg_.halting && halt[b]) || slot_steps_[b] >= schedule_.n_sup) {
      ++retired_;
      retired_steps_ += slot_steps_[b];
      refill(b);
    }
  }
  metrics.samples_retired = retired_;
  metrics.mean_sup_steps = retired_ ? static_cast<double>(retired_steps_) / static_cast<double>(retired_) : 0.0;
  if (cfg_.log_wall_time) {
    metrics.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  }
  return metrics;
}

template <class T>
void Trainer<T>::run(const std::function<void(const StepMetrics&)>& on_step) {
  while (step_ < cfg_.max_steps) {
    const auto m = step();
    if (on_step) on_step(m);
  }
}

template <class T>
PoolState<T> Trainer<T>::pool_state() const {
  PoolState<T> s;
  s.slot_example = slot_example_;
  s.slot_steps = slot_steps_;
  s.carry = carry_;
  s.order = order_;
  s.cursor = cursor_;
  s.epoch = epoch_;
  s.retired = retired_;
  s.retired_steps = retired_steps_;
  std::ostringstream os;
  os << rng_;
  s.rng_state = os.str();
  return s;
}

template <class T>
void Trainer<T>::restore(const PoolState<T>& s, std::int64_t step) {
  if (s.slot_example.size() != slot_example_.size() || s.order.size() != order_.size()) {
    throw std::invalid_argument("saved pool does not match batch size or dataset size");
  }
  slot_example_ = s.slot_example;
  slot_steps_ = s.slot_steps;
  carry_ = s.carry;
  order_ = s.order;
  cursor_ = s.cursor;
  epoch_ = s.epoch;
  retired_ = s.retired;
  retired_steps_ = s.retired_steps;
  std::istringstream is(s.rng_state);
  is >> rng_;
  step_ = step;
}

template <class T>
Model<T> Trainer<T>::eval_model() const {
  Model<T> m = model_.clone();
  if (cfg_.use_ema) ema_.copy_to(m.params());
  return m;
}

template class Trainer<float>;
template class Trainer<double>;

}  // namespace trm
