#include "trm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trm {

double warmup_factor(std::int64_t step, int warmup_steps) {
  if (warmup_steps <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup_steps));
}

template <class T>
AdamW<T>::AdamW(const ParamStore<T>& params, AdamWConfig cfg) : cfg_(cfg) {
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.var.shape());
    v_.emplace_back(e.var.shape());
  }
}

template <class T>
double AdamW<T>::lr_at(std::int64_t step, ParamGroup group) const {
  const double base = group == ParamGroup::puzzle_embedding ? cfg_.embedding_lr : cfg_.lr;
  return base * warmup_factor(step, cfg_.warmup_steps);
}

template <class T>
double AdamW<T>::weight_decay_for(ParamGroup group) const {
  return group == ParamGroup::decay ? cfg_.weight_decay : 0.0;
}

template <class T>
bool AdamW<T>::step(ParamStore<T>& params, std::int64_t step) {
  auto& entries = params.entries();
  if (entries.size() != m_.size()) throw std::logic_error("optimizer state does not match parameter store");
  for (const auto& e : entries) {
    if (e.var.has_grad() && !e.var.node()->grad.all_finite()) return false;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::int64_t touched = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    const double lr = lr_at(step, e.group);
    const double decay = 1.0 - lr * weight_decay_for(e.group);
    Tensor<T>& p = e.var.mutable_value();
    const bool has = e.var.has_grad();
    const T* g = has ? e.var.node()->grad.data() : nullptr;
    T* m = m_[i].data();
    T* v = v_[i].data();
    for (std::int64_t j = 0; j < p.size(); ++j) {
      const double gj = has ? static_cast<double>(g[j]) : 0.0;
      const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * gj;
      const double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
      p[j] = static_cast<T>(static_cast<double>(p[j]) * decay - lr * update);
    }
    touched += p.size();
  }
  last_updated_ = touched;
  return true;
}

template <class T>
void ema_update(Tensor<T>& shadow, const Tensor<T>& params, double decay) {
  if (shadow.shape() != params.shape()) throw std::invalid_argument("ema_update: shadow and params differ in shape");
  for (std::int64_t i = 0; i < shadow.size(); ++i) {
    shadow[i] = static_cast<T>(decay * static_cast<double>(shadow[i]) + (1.0 - decay) * static_cast<double>(params[i]));
  }
}

template <class T>
Ema<T>::Ema(const ParamStore<T>& params, double decay) : decay_(decay) {
  for (const auto& e : params.entries()) shadow_.push_back(e.var.value());
}

template <class T>
void Ema<T>::update(const ParamStore<T>& params) {
  const auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) ema_update(shadow_[i], entries[i].var.value(), decay_);
}

template <class T>
void Ema<T>::copy_to(ParamStore<T>& params) const {
  auto& entries = params.entries();
  if (entries.size() != shadow_.size()) throw std::invalid_argument("Ema::copy_to: store mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].var.mutable_value() = shadow_[i];
}

template <class T>
std::string Ema<T>::shadow_hash(const ParamStore<T>& names) const {
  std::string bytes;
  for (std::size_t i = 0; i < shadow_.size(); ++i) {
    bytes += names.entries()[i].name;
    bytes.append(reinterpret_cast<const char*>(shadow_[i].data()), static_cast<std::size_t>(shadow_[i].size()) * sizeof(T));
  }
  return fnv1a_hex(bytes);
}

template class AdamW<float>;
template class AdamW<double>;
template class Ema<float>;
template class Ema<double>;
template void ema_update(Tensor<float>&, const Tensor<float>&, double);
template void ema_update(Tensor<double>&, const Tensor<double>&, double);

}  // namespace trm
