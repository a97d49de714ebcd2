#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trm/data/dataset.hpp"
#include "trm/data/grid.hpp"

namespace trm::data {

struct ArcPair {
  Grid input;
  std::optional<Grid> output;  // hidden test outputs are absent
};

struct ArcTask {
  std::string id;
  std::vector<ArcPair> train;
  std::vector<ArcPair> test;
};

// Parses one task in the public ARC JSON layout. Throws DataError on
// malformed structure, colors outside 0..9, ragged or oversize grids.
ArcTask arc_parse(const nlohmann::json& j, const std::string& id = "");
// A single task file, a file mapping ids to tasks, or a directory of task files (sorted by name).
std::vector<ArcTask> arc_load(const std::filesystem::path& path);
// Compact JSON in the public layout: {"train":[{"input":..,"output":..}],"test":[..]}.
std::string arc_serialize(const ArcTask& task);

// Color permutation then dihedral element, then placement on the canvas.
struct ArcTransform {
  std::array<int, 10> colors{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int dihedral = 0;
  int offset_row = 0;
  int offset_col = 0;

  static ArcTransform identity() { return {}; }
  // Colors and dihedral only; placement is applied when encoding.
  Grid apply(const Grid& g) const;
  Grid invert(const Grid& g) const;
  friend bool operator==(const ArcTransform&, const ArcTransform&) = default;
};

void to_json(nlohmann::json& j, const ArcTransform& t);
void from_json(const nlohmann::json& j, ArcTransform& t);

ArcTask arc_apply(const ArcTask& task, const ArcTransform& t);

// Random transform whose placement keeps every grid of the task on the canvas.
ArcTransform arc_random_transform(const ArcTask& task, std::mt19937_64& rng, bool permute_background = false);

// `count` distinct transforms; the first is the identity.
std::vector<ArcTransform> arc_augment(const ArcTask& task, int count, std::uint64_t seed,
                                      bool permute_background = false);

// Demonstration pairs of every (task, augmentation) go to train, test pairs with
// known outputs to test. Each (task, augmentation) gets its own embedding row.
struct ArcSplits {
  TokenDataset train;
  TokenDataset test;
};
ArcSplits arc_build_dataset(const std::vector<ArcTask>& tasks, int augmentations, std::uint64_t seed,
                            bool permute_background = false);

// Test-input identifier stored as puzzle_id.
inline std::int64_t arc_puzzle_id(std::size_t task_index, std::size_t pair_index) {
  return static_cast<std::int64_t>(task_index) * 1000 + static_cast<std::int64_t>(pair_index);
}

}  // namespace trm::data
