#include "trm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace trm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <class T>
constexpr const char* dtype_name() {
  return sizeof(T) == 8 ? "float64" : "float32";
}

struct ArrayRef {
  std::string name;
  Shape shape;
  std::uint64_t offset;
  std::uint64_t nbytes;
};

template <class T>
class Writer {
 public:
  void add(const std::string& name, const Tensor<T>& t) {
    const std::uint64_t nbytes = static_cast<std::uint64_t>(t.size()) * sizeof(T);
    arrays_.push_back({{"name", name}, {"shape", t.shape()}, {"offset", payload_.size()}, {"nbytes", nbytes}});
    payload_.append(reinterpret_cast<const char*>(t.data()), nbytes);
  }
  nlohmann::json arrays() const { return arrays_; }
  const std::string& payload() const { return payload_; }

 private:
  nlohmann::json arrays_ = nlohmann::json::array();
  std::string payload_;
};

std::pair<nlohmann::json, std::string> read_file(const std::filesystem::path& path, bool with_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw CheckpointError(path.string() + " is not a checkpoint");
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof header_size);
  if (!in || header_size > (1ull << 32)) throw CheckpointError(path.string() + ": corrupt header size");
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw CheckpointError(path.string() + ": truncated header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError(path.string() + ": unreadable header: " + ex.what());
  }
  std::string payload;
  if (with_payload) payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return {std::move(j), std::move(payload)};
}

template <class T>
Tensor<T> take(const std::map<std::string, ArrayRef>& index, const std::string& payload, const std::string& name) {
  const auto it = index.find(name);
  if (it == index.end()) throw CheckpointError("checkpoint has no array " + name);
  const auto& a = it->second;
  Tensor<T> t(a.shape);
  if (a.nbytes != static_cast<std::uint64_t>(t.size()) * sizeof(T) || a.offset + a.nbytes > payload.size()) {
    throw CheckpointError("array " + name + " is truncated or mis-sized");
  }
  std::memcpy(t.data(), payload.data() + a.offset, a.nbytes);
  return t;
}

}  // namespace

nlohmann::json to_json(const CheckpointConfig& c) {
  return {{"net", c.net}, {"schedule", c.schedule}, {"train", c.train}, {"variant", to_string(c.variant)}};
}

CheckpointConfig checkpoint_config_from_json(const nlohmann::json& j) {
  CheckpointConfig c;
  c.net = j.at("net").get<NetConfig>();
  c.schedule = j.at("schedule").get<RecursionSchedule>();
  c.train = j.at("train").get<TrainConfig>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  return c;
}

std::string config_hash(const CheckpointConfig& c) { return fnv1a_hex(to_json(c).dump()); }

template <class T>
Model<T> Checkpoint<T>::make_model(bool use_ema) const {
  Model<T> m(config.net, config.variant, 0);
  auto& entries = m.params().entries();
  if (entries.size() != params.size()) throw CheckpointError("checkpoint parameter list does not match the config");
  if (use_ema && ema.size() != params.size()) throw CheckpointError("checkpoint has no EMA weights");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name != params[i].first || entries[i].var.shape() != params[i].second.shape()) {
      throw CheckpointError("parameter " + params[i].first + " does not match the model layout");
    }
    entries[i].var.mutable_value() = use_ema ? ema[i] : params[i].second;
  }
  m.set_initial_states(y_init, z_init);
  return m;
}

template <class T>
Checkpoint<T> snapshot(const Model<T>& model, const CheckpointConfig& config, nlohmann::json extra) {
  Checkpoint<T> c;
  c.config = config;
  for (const auto& e : model.params().entries()) c.params.emplace_back(e.name, e.var.value());
  c.y_init = model.y_init();
  c.z_init = model.z_init();
  c.extra = std::move(extra);
  return c;
}

template <class T>
Checkpoint<T> snapshot(const Trainer<T>& trainer, const CheckpointConfig& config, nlohmann::json extra) {
  const auto& tr = trainer;
  Checkpoint<T> c = snapshot(tr.model(), config, std::move(extra));
  c.step = trainer.steps_done();
  c.ema = tr.ema().shadow();
  c.adam_m = tr.optimizer().first_moments();
  c.adam_v = tr.optimizer().second_moments();
  c.adam_updates = tr.optimizer().updates();
  c.pool = trainer.pool_state();
  return c;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& c) {
  Writer<T> w;
  for (const auto& [name, t] : c.params) w.add("param/" + name, t);
  for (std::size_t i = 0; i < c.ema.size(); ++i) w.add("ema/" + c.params[i].first, c.ema[i]);
  for (std::size_t i = 0; i < c.adam_m.size(); ++i) w.add("adam_m/" + c.params[i].first, c.adam_m[i]);
  for (std::size_t i = 0; i < c.adam_v.size(); ++i) w.add("adam_v/" + c.params[i].first, c.adam_v[i]);
  w.add("y_init", c.y_init);
  w.add("z_init", c.z_init);
  nlohmann::json header = {{"format", 1},
                           {"dtype", dtype_name<T>()},
                           {"config", to_json(c.config)},
                           {"config_hash", config_hash(c.config)},
                           {"seed", c.config.train.seed},
                           {"step", c.step},
                           {"adam_updates", c.adam_updates},
                           {"param_names", nlohmann::json::array()},
                           {"has_ema", !c.ema.empty()},
                           {"extra", c.extra}};
  for (const auto& p : c.params) header["param_names"].push_back(p.first);
  if (c.pool) {
    const auto& p = *c.pool;
    if (!p.carry.y.empty()) w.add("pool/y", p.carry.y);
    if (!p.carry.z.empty()) w.add("pool/z", p.carry.z);
    for (std::size_t i = 0; i < p.carry.z_slots.size(); ++i) w.add("pool/z_slot" + std::to_string(i), p.carry.z_slots[i]);
    header["pool"] = {{"slot_example", p.slot_example}, {"slot_steps", p.slot_steps},     {"order", p.order},
                      {"cursor", p.cursor},             {"epoch", p.epoch},               {"retired", p.retired},
                      {"retired_steps", p.retired_steps}, {"rng_state", p.rng_state},
                      {"z_slots", p.carry.z_slots.size()}, {"has_y", !p.carry.y.empty()}, {"has_z", !p.carry.z.empty()}};
  }
  header["arrays"] = w.arrays();
  const std::string text = header.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    const std::uint64_t size = text.size();
    out.write(kCheckpointMagic, 8);
    out.write(reinterpret_cast<const char*>(&size), sizeof size);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(w.payload().data(), static_cast<std::streamsize>(w.payload().size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) { return read_file(path, false).first; }

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  auto [h, payload] = read_file(path, true);
  if (h.value("dtype", "") != dtype_name<T>()) {
    throw CheckpointError(path.string() + " stores " + h.value("dtype", "?") + ", expected " + dtype_name<T>());
  }
  std::map<std::string, ArrayRef> index;
  for (const auto& a : h.at("arrays")) {
    ArrayRef r{a.at("name").get<std::string>(), a.at("shape").get<Shape>(), a.at("offset").get<std::uint64_t>(),
               a.at("nbytes").get<std::uint64_t>()};
    index.emplace(r.name, r);
  }
  Checkpoint<T> c;
  try {
    c.config = checkpoint_config_from_json(h.at("config"));
  } catch (const std::exception& ex) {
    throw CheckpointError(path.string() + ": bad config: " + ex.what());
  }
  c.step = h.at("step").get<std::int64_t>();
  c.adam_updates = h.value("adam_updates", std::int64_t{0});
  c.extra = h.value("extra", nlohmann::json());
  for (const auto& name : h.at("param_names")) {
    const auto n = name.get<std::string>();
    c.params.emplace_back(n, take<T>(index, payload, "param/" + n));
    if (index.count("ema/" + n)) c.ema.push_back(take<T>(index, payload, "ema/" + n));
    if (index.count("adam_m/" + n)) c.adam_m.push_back(take<T>(index, payload, "adam_m/" + n));
    if (index.count("adam_v/" + n)) c.adam_v.push_back(take<T>(index, payload, "adam_v/" + n));
  }
  c.y_init = take<T>(index, payload, "y_init");
  c.z_init = take<T>(index, payload, "z_init");
  if (h.contains("pool")) {
    const auto& p = h["pool"];
    PoolState<T> s;
    s.slot_example = p.at("slot_example").get<std::vector<std::int64_t>>();
    s.slot_steps = p.at("slot_steps").get<std::vector<int>>();
    s.order = p.at("order").get<std::vector<std::int64_t>>();
    s.cursor = p.at("cursor").get<std::int64_t>();
    s.epoch = p.at("epoch").get<std::int64_t>();
    s.retired = p.at("retired").get<std::int64_t>();
    s.retired_steps = p.at("retired_steps").get<std::int64_t>();
    s.rng_state = p.at("rng_state").get<std::string>();
    if (p.at("has_y").get<bool>()) s.carry.y = take<T>(index, payload, "pool/y");
    if (p.at("has_z").get<bool>()) s.carry.z = take<T>(index, payload, "pool/z");
    for (std::size_t i = 0; i < p.at("z_slots").get<std::size_t>(); ++i) {
      s.carry.z_slots.push_back(take<T>(index, payload, "pool/z_slot" + std::to_string(i)));
    }
    c.pool = std::move(s);
  }
  return c;
}

template <class T>
void restore_trainer(Trainer<T>& trainer, const Checkpoint<T>& c) {
  if (!c.pool) throw CheckpointError("checkpoint holds no training state");
  auto& entries = trainer.model().params().entries();
  if (entries.size() != c.params.size() || c.adam_m.size() != entries.size() || c.ema.size() != entries.size()) {
    throw CheckpointError("checkpoint does not match the trainer's model");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name != c.params[i].first || entries[i].var.shape() != c.params[i].second.shape()) {
      throw CheckpointError("parameter " + c.params[i].first + " does not match the model layout");
    }
    entries[i].var.mutable_value() = c.params[i].second;
    trainer.optimizer().first_moments()[i] = c.adam_m[i];
    trainer.optimizer().second_moments()[i] = c.adam_v[i];
    trainer.ema().shadow()[i] = c.ema[i];
  }
  trainer.optimizer().set_updates(c.adam_updates);
  trainer.model().set_initial_states(c.y_init, c.z_init);
  trainer.restore(*c.pool, c.step);
}

#define TRM_INSTANTIATE_CKPT(T)                                                                     \
  template struct Checkpoint<T>;                                                                    \
  template Checkpoint<T> snapshot(const Trainer<T>&, const CheckpointConfig&, nlohmann::json);      \
  template Checkpoint<T> snapshot(const Model<T>&, const CheckpointConfig&, nlohmann::json);        \
  template void save_checkpoint(const std::filesystem::path&, const Checkpoint<T>&);                \
  template Checkpoint<T> load_checkpoint(const std::filesystem::path&);                             \
  template void restore_trainer(Trainer<T>&, const Checkpoint<T>&);

TRM_INSTANTIATE_CKPT(float)
TRM_INSTANTIATE_CKPT(double)

}  // namespace trm
