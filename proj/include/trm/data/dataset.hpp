#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trm/data/grid.hpp"

namespace trm::data {

// One tokenized training or evaluation example.
struct Example {
  std::vector<std::int32_t> input;   // [L]
  std::vector<std::int32_t> target;  // [L]
  std::vector<std::uint8_t> mask;    // [L], 1 where the loss and exact match apply
  std::int64_t puzzle_id = 0;        // source puzzle
  std::int64_t augmentation_id = 0;
  std::int32_t embedding_id = 0;     // row of the puzzle-id embedding table
  int height = 0;                    // unpadded grid size of the target
  int width = 0;
  nlohmann::json augmentation;       // task-specific transform description, null when none
};

struct TokenDataset {
  Task task = Task::sudoku;
  int seq_len = 0;
  int vocab_size = 0;
  int n_puzzle_ids = 1;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

// Canvas used for a task: the grid itself for sudoku/maze, 30x30 for arc.
CanvasLayout task_layout(Task task, int height, int width);
int task_vocab(Task task, int grid_size);

// Tokenizes an instance. Every canvas position is supervised.
Example encode_instance(const PuzzleInstance& p, std::int32_t embedding_id, const CanvasLayout& layout);

// JSON-lines record: {"task","puzzle_id","augmentation_id","embedding_id","height","width","input","target"}.
nlohmann::json to_record(const Example& e, Task task);
Example from_record(const nlohmann::json& j, Task expected_task, int seq_len, int vocab_size);

// Thrown for unreadable or inconsistent dataset files.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stable content hash of a split (order-sensitive over records).
std::string split_hash(const TokenDataset& ds);
// Order-insensitive per-example key used to test train/test disjointness.
std::string example_key(const Example& e);

void write_jsonl(const std::filesystem::path& path, const TokenDataset& ds);
// Reads a split; vocabulary and sequence length come from the manifest.
TokenDataset read_jsonl(const std::filesystem::path& path, Task task, int seq_len, int vocab_size, int n_puzzle_ids);

struct Manifest {
  Task task = Task::sudoku;
  int seq_len = 0;
  int vocab_size = 0;
  int n_puzzle_ids = 1;
  std::uint64_t seed = 0;
  nlohmann::json params;  // generator parameters
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::string> hashes;
  std::string config_hash;
};

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);
Manifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const Manifest& m);
// Loads <dir>/<split>.jsonl using <dir>/manifest.json.
TokenDataset load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace trm::data
