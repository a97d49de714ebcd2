#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "trm/data/grid.hpp"

namespace trm::data {

struct MazeGenOptions {
  int height = 12;
  int width = 12;
  // Minimum number of moves on the shortest START to END path.
  int min_path_len = 44;
  int count = 0;
  // Carvings tried per emitted maze before giving up.
  int attempts_per_maze = 2000;
};

using Cell = std::pair<int, int>;

// BFS over non-wall cells from START to END. Cells in order, both ends
// included; nullopt when unreachable or when START/END are not unique.
std::optional<std::vector<Cell>> maze_shortest_path(const Grid& maze);

// True when target equals input with PATH marking a shortest path between
// the endpoints (START and END themselves stay marked).
bool maze_target_valid(const Grid& input, const Grid& target);

// Perfect mazes carved by randomized depth-first search over cells, so the
// path between any two open cells is unique. Cells hold maze token codes.
// Throws std::invalid_argument for an unachievable min_path_len and
// std::runtime_error when the attempt budget runs out.
std::vector<PuzzleInstance> maze_generate(const MazeGenOptions& opts, std::uint64_t seed);

}  // namespace trm::data
