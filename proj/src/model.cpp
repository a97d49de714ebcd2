#include "trm/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace trm {

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::decay: return "decay";
    case ParamGroup::no_decay: return "no_decay";
    case ParamGroup::puzzle_embedding: return "puzzle_embedding";
  }
  return "?";
}

// ---------------------------------------------------------------- ParamStore

template <class T>
Var<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init, ParamGroup group) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, Var<T>::leaf(std::move(init)), group});
  return entries_.back().var;
}

template <class T>
Var<T>& ParamStore<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second].var;
}

template <class T>
const Var<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second].var;
}

template <class T>
std::int64_t ParamStore<T>::element_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

template <class T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

template <class T>
std::string ParamStore<T>::values_hash() const {
  std::string bytes;
  for (const auto& e : entries_) {
    bytes += e.name;
    const auto& v = e.var.value();
    bytes.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(T));
  }
  return fnv1a_hex(bytes);
}

// ---------------------------------------------------------------- functional forms

template <class T>
Tensor<T> truncated_normal(Shape shape, double std, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.storage()) {
    double x;
    do {
      x = dist(rng);
    } while (std::abs(x) > 2.0);
    v = static_cast<T>(x * std);
  }
  return t;
}

template <class T>
Var<T> block_forward(const Var<T>& h, const NetConfig& cfg, const BlockParams<T>& p,
                     const std::shared_ptr<const RotaryTable<T>>& rope) {
  const auto& s = h.shape();
  if (s.size() != 3 || s[1] != cfg.seq_len || s[2] != cfg.hidden) {
    throw std::invalid_argument("block_forward: expected [B," + std::to_string(cfg.seq_len) + "," +
                                std::to_string(cfg.hidden) + "], got " + shape_to_string(s));
  }
  Var<T> normed = rmsnorm(h, p.norm_mix, cfg.norm_eps);
  Var<T> mixed;
  if (cfg.arch == Arch::attention) {
    mixed = linear(self_attention(linear(normed, p.qkv), cfg.n_heads, rope), p.attn_out);
  } else {
    mixed = sequence_mix(normed, p.mix);
  }
  Var<T> h1 = add(h, mixed);
  Var<T> n2 = rmsnorm(h1, p.norm_mlp, cfg.norm_eps);
  Var<T> mlp = linear(swiglu(linear(n2, p.gate), linear(n2, p.up)), p.down);
  return add(h1, mlp);
}

template <class T>
Var<T> net_forward(std::span<const Var<T>> inputs, const NetConfig& cfg, const NetParams<T>& params,
                   const std::shared_ptr<const RotaryTable<T>>& rope, std::size_t max_inputs) {
  if (inputs.size() < 2 || inputs.size() > max_inputs) {
    throw std::invalid_argument("net: expected 2.." + std::to_string(max_inputs) + " inputs, got " +
                                std::to_string(inputs.size()));
  }
  Var<T> h = add(std::vector<Var<T>>(inputs.begin(), inputs.end()));
  for (const auto& block : params.blocks) h = block_forward(h, cfg, block, rope);
  return rmsnorm(h, params.final_norm, cfg.norm_eps);
}

template <class T>
std::vector<std::int32_t> decode(const Tensor<T>& logits) {
  const std::int64_t V = logits.dim(-1);
  const std::int64_t positions = logits.size() / V;
  std::vector<std::int32_t> out(static_cast<std::size_t>(positions));
  for (std::int64_t p = 0; p < positions; ++p) {
    const T* row = logits.data() + p * V;
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < V; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(best);
  }
  return out;
}

std::int64_t param_count(const NetConfig& cfg, Variant variant) {
  const std::int64_t D = cfg.hidden, L = cfg.seq_len, V = cfg.vocab_size, I = cfg.ffn_inner();
  const std::int64_t mixing = cfg.arch == Arch::attention ? D * 3 * D + D * D : L * L;
  const std::int64_t block = 2 * D + mixing + 3 * D * I;
  const std::int64_t net = cfg.n_layers * block + D;
  const std::int64_t nets = variant == Variant::hrm ? 2 : 1;
  const std::int64_t halt = variant == Variant::hrm ? 2 : 1;
  return nets * net + V * D + static_cast<std::int64_t>(cfg.n_puzzle_ids) * D + D * V + D * halt;
}

// ---------------------------------------------------------------- Model

namespace {

template <class T>
NetParams<T> register_net(ParamStore<T>& store, const NetConfig& cfg, const std::string& prefix, std::mt19937_64& rng) {
  const std::int64_t D = cfg.hidden, L = cfg.seq_len, I = cfg.ffn_inner();
  NetParams<T> net;
  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::string b = prefix + ".block" + std::to_string(i);
    BlockParams<T> p;
    p.norm_mix = store.add(b + ".norm_mix", Tensor<T>(Shape{D}, T(1)), ParamGroup::no_decay);
    if (cfg.arch == Arch::attention) {
      p.qkv = store.add(b + ".attn.qkv", truncated_normal<T>({D, 3 * D}, cfg.init_std, rng), ParamGroup::decay);
      p.attn_out = store.add(b + ".attn.out", truncated_normal<T>({D, D}, cfg.init_std, rng), ParamGroup::decay);
    } else {
      p.mix = store.add(b + ".mix", truncated_normal<T>({L, L}, cfg.init_std, rng), ParamGroup::decay);
    }
    p.norm_mlp = store.add(b + ".norm_mlp", Tensor<T>(Shape{D}, T(1)), ParamGroup::no_decay);
    p.gate = store.add(b + ".mlp.gate", truncated_normal<T>({D, I}, cfg.init_std, rng), ParamGroup::decay);
    p.up = store.add(b + ".mlp.up", truncated_normal<T>({D, I}, cfg.init_std, rng), ParamGroup::decay);
    p.down = store.add(b + ".mlp.down", truncated_normal<T>({I, D}, cfg.init_std, rng), ParamGroup::decay);
    net.blocks.push_back(std::move(p));
  }
  net.final_norm = store.add(prefix + ".final_norm", Tensor<T>(Shape{D}, T(1)), ParamGroup::no_decay);
  return net;
}

template <class T>
NetParams<T> lookup_net(ParamStore<T>& store, const NetConfig& cfg, const std::string& prefix) {
  NetParams<T> net;
  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::string b = prefix + ".block" + std::to_string(i);
    BlockParams<T> p;
    p.norm_mix = store.at(b + ".norm_mix");
    if (cfg.arch == Arch::attention) {
      p.qkv = store.at(b + ".attn.qkv");
      p.attn_out = store.at(b + ".attn.out");
    } else {
      p.mix = store.at(b + ".mix");
    }
    p.norm_mlp = store.at(b + ".norm_mlp");
    p.gate = store.at(b + ".mlp.gate");
    p.up = store.at(b + ".mlp.up");
    p.down = store.at(b + ".mlp.down");
    net.blocks.push_back(std::move(p));
  }
  net.final_norm = store.at(prefix + ".final_norm");
  return net;
}

}  // namespace

template <class T>
Model<T>::Model(const NetConfig& cfg, Variant variant, std::uint64_t seed) : cfg_(cfg), variant_(variant) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::int64_t D = cfg.hidden, V = cfg.vocab_size;
  params_.add("embed.tokens", truncated_normal<T>({V, D}, 1.0 / std::sqrt(static_cast<double>(D)), rng),
              ParamGroup::no_decay);
  params_.add("embed.puzzle", Tensor<T>(Shape{cfg.n_puzzle_ids, D}), ParamGroup::puzzle_embedding);
  if (variant == Variant::hrm) {
    register_net(params_, cfg_, "net_low", rng);
    register_net(params_, cfg_, "net_high", rng);
  } else {
    register_net(params_, cfg_, "net", rng);
  }
  params_.add("head.output", truncated_normal<T>({D, V}, cfg.init_std, rng), ParamGroup::decay);
  params_.add("head.halt", Tensor<T>(Shape{D, variant == Variant::hrm ? 2 : 1}), ParamGroup::decay);
  y_init_ = truncated_normal<T>({D}, 1.0, rng);
  z_init_ = truncated_normal<T>({D}, 1.0, rng);
  bind();
  if (params_.element_count() != param_count(cfg_, variant_)) {
    throw std::logic_error("parameter registration disagrees with param_count()");
  }
}

template <class T>
void Model<T>::bind() {
  if (variant_ == Variant::hrm) {
    low_ = lookup_net(params_, cfg_, "net_low");
    high_ = lookup_net(params_, cfg_, "net_high");
  } else {
    shared_ = lookup_net(params_, cfg_, "net");
  }
  if (cfg_.arch == Arch::attention) {
    rope_ = std::make_shared<const RotaryTable<T>>(cfg_.seq_len, cfg_.head_dim(), cfg_.rope_base);
  }
}

template <class T>
Model<T> Model<T>::clone() const {
  Model<T> copy(cfg_, variant_, 0);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    copy.params_.entries()[i].var.mutable_value() = params_.entries()[i].var.value();
  }
  copy.y_init_ = y_init_;
  copy.z_init_ = z_init_;
  return copy;
}

template <class T>
void Model<T>::set_initial_states(Tensor<T> y_init, Tensor<T> z_init) {
  if (y_init.size() != cfg_.hidden || z_init.size() != cfg_.hidden) {
    throw std::invalid_argument("initial states must have hidden size elements");
  }
  y_init_ = std::move(y_init);
  z_init_ = std::move(z_init);
}

template <class T>
Tensor<T> Model<T>::broadcast_state(const Tensor<T>& init, std::int64_t batch) const {
  const std::int64_t L = cfg_.seq_len, D = cfg_.hidden;
  Tensor<T> out(Shape{batch, L, D});
  for (std::int64_t r = 0; r < batch * L; ++r) std::copy(init.data(), init.data() + D, out.data() + r * D);
  return out;
}

template <class T>
const NetParams<T>& Model<T>::net_params(NetRole role) const {
  if (variant_ == Variant::hrm) {
    if (role == NetRole::shared) throw std::invalid_argument("hrm model has no shared network");
    return role == NetRole::low ? low_ : high_;
  }
  if (role != NetRole::shared) throw std::invalid_argument("only hrm models have low/high networks");
  return shared_;
}

template <class T>
Var<T> Model<T>::embed_input(std::span<const std::int32_t> tokens, std::span<const std::int32_t> puzzle_ids) const {
  const auto B = static_cast<std::int64_t>(puzzle_ids.size());
  const std::int64_t L = cfg_.seq_len, D = cfg_.hidden;
  if (static_cast<std::int64_t>(tokens.size()) != B * L) throw std::invalid_argument("embed_input: tokens must be [B*L]");
  std::vector<std::int32_t> rows(puzzle_ids.begin(), puzzle_ids.end());
  if (cfg_.n_puzzle_ids == 1) std::fill(rows.begin(), rows.end(), 0);
  const T factor = static_cast<T>(std::sqrt(static_cast<double>(D)));
  Var<T> tok = embedding(params_.at("embed.tokens"), tokens, Shape{B, L, D}, factor);
  return add(tok, broadcast_rows(params_.at("embed.puzzle"), rows, L));
}

template <class T>
Var<T> Model<T>::net(std::span<const Var<T>> inputs, NetRole role) const {
  const std::size_t max_inputs = variant_ == Variant::multi_z ? inputs.size() : 3;
  return net_forward(inputs, cfg_, net_params(role), rope_, std::max<std::size_t>(max_inputs, 3));
}

template <class T>
Var<T> Model<T>::output_head(const Var<T>& y) const {
  return linear(y, params_.at("head.output"));
}

template <class T>
Var<T> Model<T>::halt_head(const Var<T>& y) const {
  return linear(mean_over_sequence(y), params_.at("head.halt"));
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Model<float>;
template class Model<double>;
template Tensor<float> truncated_normal(Shape, double, std::mt19937_64&);
template Tensor<double> truncated_normal(Shape, double, std::mt19937_64&);
template Var<float> block_forward(const Var<float>&, const NetConfig&, const BlockParams<float>&,
                                  const std::shared_ptr<const RotaryTable<float>>&);
template Var<double> block_forward(const Var<double>&, const NetConfig&, const BlockParams<double>&,
                                   const std::shared_ptr<const RotaryTable<double>>&);
template Var<float> net_forward(std::span<const Var<float>>, const NetConfig&, const NetParams<float>&,
                                const std::shared_ptr<const RotaryTable<float>>&, std::size_t);
template Var<double> net_forward(std::span<const Var<double>>, const NetConfig&, const NetParams<double>&,
                                 const std::shared_ptr<const RotaryTable<double>>&, std::size_t);
template std::vector<std::int32_t> decode(const Tensor<float>&);
template std::vector<std::int32_t> decode(const Tensor<double>&);

}  // namespace trm
