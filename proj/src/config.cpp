#include "trm/config.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace trm {

std::string to_string(Arch a) { return a == Arch::attention ? "attention" : "mixer"; }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::trm: return "trm";
    case Variant::hrm: return "hrm";
    case Variant::single_z: return "single_z";
    case Variant::multi_z: return "multi_z";
  }
  return "?";
}

Arch parse_arch(const std::string& s) {
  if (s == "attention") return Arch::attention;
  if (s == "mixer" || s == "mlp") return Arch::mixer;
  throw std::invalid_argument("unknown architecture '" + s + "' (expected attention|mixer)");
}

Variant parse_variant(const std::string& s) {
  if (s == "trm") return Variant::trm;
  if (s == "hrm") return Variant::hrm;
  if (s == "single_z" || s == "single-z") return Variant::single_z;
  if (s == "multi_z" || s == "multi-z") return Variant::multi_z;
  throw std::invalid_argument("unknown variant '" + s + "' (expected trm|hrm|single_z|multi_z)");
}

int NetConfig::ffn_inner() const {
  const auto base = static_cast<long>(std::lround(expansion * hidden * 2.0 / 3.0));
  const long m = ffn_multiple;
  return static_cast<int>(((base + m - 1) / m) * m);
}

void NetConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("net config: " + msg); };
  if (n_layers < 1) fail("n_layers must be positive");
  if (hidden < 1) fail("hidden must be positive");
  if (n_heads < 1) fail("n_heads must be positive");
  if (expansion <= 0) fail("expansion must be positive");
  if (ffn_multiple < 1) fail("ffn_multiple must be positive");
  if (vocab_size < 2) fail("vocab_size must be at least 2");
  if (seq_len < 1) fail("seq_len must be positive");
  if (rope_base <= 0) fail("rope_base must be positive");
  if (norm_eps <= 0) fail("norm_eps must be positive");
  if (n_puzzle_ids < 1) fail("n_puzzle_ids must be positive");
  if (init_std <= 0) fail("init_std must be positive");
  if (arch == Arch::attention) {
    if (hidden % n_heads != 0) fail("hidden must be divisible by n_heads");
    if (head_dim() % 2 != 0) fail("head dimension must be even for rotary encoding");
  }
}

void RecursionSchedule::validate() const {
  const int min_n = variant == Variant::single_z ? 0 : 1;
  if (n < min_n) throw std::invalid_argument("schedule: n must be >= " + std::to_string(min_n));
  if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
  if (n_sup < 1) throw std::invalid_argument("schedule: n_sup must be >= 1");
  if (variant == Variant::hrm && n * T < 2) throw std::invalid_argument("schedule: hrm needs n*T >= 2");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw std::invalid_argument("train: ema_decay must lie in (0, 1)");
  if (warmup_steps < 0) throw std::invalid_argument("train: warmup_steps must be >= 0");
  if (lr <= 0 || embedding_lr <= 0) throw std::invalid_argument("train: learning rates must be positive");
  if (max_steps < 0) throw std::invalid_argument("train: max_steps must be >= 0");
}

void to_json(nlohmann::json& j, const NetConfig& c) {
  j = {{"n_layers", c.n_layers},     {"hidden", c.hidden},         {"n_heads", c.n_heads},
       {"expansion", c.expansion},   {"ffn_multiple", c.ffn_multiple}, {"arch", to_string(c.arch)},
       {"vocab_size", c.vocab_size}, {"seq_len", c.seq_len},       {"rope_base", c.rope_base},
       {"norm_eps", c.norm_eps},     {"n_puzzle_ids", c.n_puzzle_ids}, {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, NetConfig& c) {
  NetConfig d;
  c.n_layers = j.value("n_layers", d.n_layers);
  c.hidden = j.value("hidden", d.hidden);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.expansion = j.value("expansion", d.expansion);
  c.ffn_multiple = j.value("ffn_multiple", d.ffn_multiple);
  c.arch = parse_arch(j.value("arch", to_string(d.arch)));
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.seq_len = j.value("seq_len", d.seq_len);
  c.rope_base = j.value("rope_base", d.rope_base);
  c.norm_eps = j.value("norm_eps", d.norm_eps);
  c.n_puzzle_ids = j.value("n_puzzle_ids", d.n_puzzle_ids);
  c.init_std = j.value("init_std", d.init_std);
}

void to_json(nlohmann::json& j, const RecursionSchedule& c) {
  j = {{"variant", to_string(c.variant)}, {"n", c.n}, {"T", c.T}, {"n_sup", c.n_sup}};
}

void from_json(const nlohmann::json& j, RecursionSchedule& c) {
  RecursionSchedule d;
  c.variant = parse_variant(j.value("variant", to_string(d.variant)));
  c.n = j.value("n", d.n);
  c.T = j.value("T", d.T);
  c.n_sup = j.value("n_sup", d.n_sup);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"lr", c.lr},
       {"embedding_lr", c.embedding_lr},
       {"warmup_steps", c.warmup_steps},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},
       {"weight_decay", c.weight_decay},
       {"ema_decay", c.ema_decay},
       {"use_ema", c.use_ema},
       {"halting", c.halting},
       {"max_steps", c.max_steps},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"log_wall_time", c.log_wall_time}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lr = j.value("lr", d.lr);
  c.embedding_lr = j.value("embedding_lr", d.embedding_lr);
  c.warmup_steps = j.value("warmup_steps", d.warmup_steps);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.ema_decay = j.value("ema_decay", d.ema_decay);
  c.use_ema = j.value("use_ema", d.use_ema);
  c.halting = j.value("halting", d.halting);
  c.max_steps = j.value("max_steps", d.max_steps);
  c.seed = j.value("seed", d.seed);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.log_wall_time = j.value("log_wall_time", d.log_wall_time);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fnv1a_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

}  // namespace trm
