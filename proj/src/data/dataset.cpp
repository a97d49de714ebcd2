#include "trm/data/dataset.hpp"

#include <fstream>
#include <sstream>

#include "trm/config.hpp"

namespace trm::data {

CanvasLayout task_layout(Task task, int height, int width) {
  if (task == Task::arc) return {kArcCanvas, kArcCanvas, 0, 0};
  return {height, width, 0, 0};
}

int task_vocab(Task task, int grid_size) {
  switch (task) {
    case Task::sudoku: return sudoku_vocab(grid_size);
    case Task::maze: return maze_tokens::kVocab;
    case Task::arc: return kArcVocab;
  }
  return 0;
}

Example encode_instance(const PuzzleInstance& p, std::int32_t embedding_id, const CanvasLayout& layout) {
  Example e;
  e.input = encode_grid(p.input, p.task, layout);
  e.target = encode_grid(p.target, p.task, layout);
  e.mask.assign(e.target.size(), 1);
  e.puzzle_id = p.puzzle_id;
  e.augmentation_id = p.augmentation_id;
  e.embedding_id = embedding_id;
  e.height = p.target.height;
  e.width = p.target.width;
  return e;
}

nlohmann::json to_record(const Example& e, Task task) {
  nlohmann::json j = {{"task", to_string(task)},       {"puzzle_id", e.puzzle_id}, {"augmentation_id", e.augmentation_id},
          {"embedding_id", e.embedding_id}, {"height", e.height},       {"width", e.width},
          {"input", e.input},               {"target", e.target}};
  if (!e.augmentation.is_null()) j["augmentation"] = e.augmentation;
  return j;
}

Example from_record(const nlohmann::json& j, Task expected_task, int seq_len, int vocab_size) {
  Example e;
  try {
    if (parse_task(j.at("task").get<std::string>()) != expected_task) throw DataError("record task does not match manifest");
    e.puzzle_id = j.at("puzzle_id").get<std::int64_t>();
    e.augmentation_id = j.at("augmentation_id").get<std::int64_t>();
    e.embedding_id = j.at("embedding_id").get<std::int32_t>();
    e.height = j.at("height").get<int>();
    e.width = j.at("width").get<int>();
    e.input = j.at("input").get<std::vector<std::int32_t>>();
    e.target = j.at("target").get<std::vector<std::int32_t>>();
    if (j.contains("augmentation")) e.augmentation = j.at("augmentation");
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed record: ") + ex.what());
  }
  if (static_cast<int>(e.input.size()) != seq_len || static_cast<int>(e.target.size()) != seq_len) {
    throw DataError("record length differs from seq_len " + std::to_string(seq_len));
  }
  for (const auto* v : {&e.input, &e.target}) {
    for (auto t : *v) {
      if (t < 0 || t >= vocab_size) throw DataError("token " + std::to_string(t) + " outside vocabulary");
    }
  }
  e.mask.assign(e.target.size(), 1);
  return e;
}

std::string example_key(const Example& e) {
  std::string bytes(reinterpret_cast<const char*>(e.input.data()), e.input.size() * sizeof(std::int32_t));
  bytes.append(reinterpret_cast<const char*>(e.target.data()), e.target.size() * sizeof(std::int32_t));
  return fnv1a_hex(bytes);
}

std::string split_hash(const TokenDataset& ds) {
  std::string bytes;
  for (const auto& e : ds.examples) bytes += to_record(e, ds.task).dump() + "\n";
  return fnv1a_hex(bytes);
}

void write_jsonl(const std::filesystem::path& path, const TokenDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : ds.examples) out << to_record(e, ds.task).dump() << '\n';
}

TokenDataset read_jsonl(const std::filesystem::path& path, Task task, int seq_len, int vocab_size, int n_puzzle_ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  TokenDataset ds;
  ds.task = task;
  ds.seq_len = seq_len;
  ds.vocab_size = vocab_size;
  ds.n_puzzle_ids = n_puzzle_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      ds.examples.push_back(from_record(nlohmann::json::parse(line), task, seq_len, vocab_size));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    if (ds.examples.back().embedding_id < 0 || ds.examples.back().embedding_id >= n_puzzle_ids) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": embedding_id outside the manifest table");
    }
  }
  return ds;
}

void to_json(nlohmann::json& j, const Manifest& m) {
  j = {{"task", to_string(m.task)},
       {"seq_len", m.seq_len},
       {"vocab_size", m.vocab_size},
       {"n_puzzle_ids", m.n_puzzle_ids},
       {"seed", m.seed},
       {"params", m.params},
       {"counts", m.counts},
       {"hashes", m.hashes},
       {"config_hash", m.config_hash}};
}

void from_json(const nlohmann::json& j, Manifest& m) {
  m.task = parse_task(j.at("task").get<std::string>());
  m.seq_len = j.at("seq_len").get<int>();
  m.vocab_size = j.at("vocab_size").get<int>();
  m.n_puzzle_ids = j.at("n_puzzle_ids").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.params = j.value("params", nlohmann::json::object());
  m.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
  m.hashes = j.at("hashes").get<std::map<std::string, std::string>>();
  m.config_hash = j.value("config_hash", "");
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no manifest.json in " + dir.string());
  try {
    return nlohmann::json::parse(in).get<Manifest>();
  } catch (const std::exception& ex) {
    throw DataError("invalid manifest in " + dir.string() + ": " + ex.what());
  }
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << nlohmann::json(m).dump(2) << '\n';
}

TokenDataset load_split(const std::filesystem::path& dir, const std::string& split) {
  const Manifest m = read_manifest(dir);
  TokenDataset ds = read_jsonl(dir / (split + ".jsonl"), m.task, m.seq_len, m.vocab_size, m.n_puzzle_ids);
  const auto it = m.hashes.find(split);
  if (it != m.hashes.end() && it->second != split_hash(ds)) {
    throw DataError(split + ".jsonl does not match the hash recorded in the manifest");
  }
  return ds;
}

}  // namespace trm::data
