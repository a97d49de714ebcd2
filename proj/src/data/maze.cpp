#include "trm/data/maze.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>
#include <stdexcept>

namespace trm::data {

namespace {

using namespace maze_tokens;

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

bool inside(const Grid& g, int r, int c) { return r >= 0 && c >= 0 && r < g.height && c < g.width; }

int open_neighbors(const Grid& g, int r, int c) {
  int n = 0;
  for (int d = 0; d < 4; ++d) {
    const int rr = r + kDr[d], cc = c + kDc[d];
    if (inside(g, rr, cc) && g.at(rr, cc) != kWall) ++n;
  }
  return n;
}

Grid carve(int h, int w, std::mt19937_64& rng) {
  Grid g(h, w, kWall);
  std::vector<Cell> stack;
  const Cell start{std::uniform_int_distribution<int>(0, h - 1)(rng), std::uniform_int_distribution<int>(0, w - 1)(rng)};
  g.at(start.first, start.second) = kEmpty;
  stack.push_back(start);
  while (!stack.empty()) {
    const auto [r, c] = stack.back();
    std::vector<Cell> options;
    for (int d = 0; d < 4; ++d) {
      const int rr = r + kDr[d], cc = c + kDc[d];
      // a new cell may touch only the cell it grows from, keeping the carving a tree
      if (inside(g, rr, cc) && g.at(rr, cc) == kWall && open_neighbors(g, rr, cc) == 1) options.emplace_back(rr, cc);
    }
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    const Cell next = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    g.at(next.first, next.second) = kEmpty;
    stack.push_back(next);
  }
  return g;
}

std::vector<int> distances_from(const Grid& g, Cell from) {
  std::vector<int> dist(g.cells.size(), -1);
  std::deque<Cell> queue{from};
  dist[static_cast<std::size_t>(from.first * g.width + from.second)] = 0;
  while (!queue.empty()) {
    const auto [r, c] = queue.front();
    queue.pop_front();
    const int here = dist[static_cast<std::size_t>(r * g.width + c)];
    for (int d = 0; d < 4; ++d) {
      const int rr = r + kDr[d], cc = c + kDc[d];
      if (!inside(g, rr, cc) || g.at(rr, cc) == kWall) continue;
      auto& seen = dist[static_cast<std::size_t>(rr * g.width + cc)];
      if (seen < 0) {
        seen = here + 1;
        queue.emplace_back(rr, cc);
      }
    }
  }
  return dist;
}

std::optional<Cell> find_unique(const Grid& g, int token) {
  std::optional<Cell> found;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (g.at(r, c) != token) continue;
      if (found) return std::nullopt;
      found = Cell{r, c};
    }
  }
  return found;
}

}  // namespace

std::optional<std::vector<Cell>> maze_shortest_path(const Grid& maze) {
  const auto start = find_unique(maze, kStart);
  const auto end = find_unique(maze, kEnd);
  if (!start || !end) return std::nullopt;
  const auto dist = distances_from(maze, *end);
  if (dist[static_cast<std::size_t>(start->first * maze.width + start->second)] < 0) return std::nullopt;
  // Walk downhill from START; ties resolved by the fixed direction order.
  std::vector<Cell> path{*start};
  Cell at = *start;
  while (at != *end) {
    const int here = dist[static_cast<std::size_t>(at.first * maze.width + at.second)];
    for (int d = 0; d < 4; ++d) {
      const int rr = at.first + kDr[d], cc = at.second + kDc[d];
      if (inside(maze, rr, cc) && dist[static_cast<std::size_t>(rr * maze.width + cc)] == here - 1) {
        at = {rr, cc};
        break;
      }
    }
    path.push_back(at);
  }
  return path;
}

bool maze_target_valid(const Grid& input, const Grid& target) {
  if (input.height != target.height || input.width != target.width) return false;
  const auto path = maze_shortest_path(input);
  if (!path) return false;
  std::set<Cell> marked;
  for (int r = 0; r < input.height; ++r) {
    for (int c = 0; c < input.width; ++c) {
      const int in = input.at(r, c), out = target.at(r, c);
      if (out == kPath) {
        if (in != kEmpty) return false;
        marked.insert({r, c});
      } else if (out != in) {
        return false;
      }
    }
  }
  // the marked cells plus both ends must form a walk of shortest length
  if (marked.size() + 2 != path->size()) return false;
  Grid corridor(input.height, input.width, kWall);
  for (const auto& [r, c] : marked) corridor.at(r, c) = kEmpty;
  corridor.at(path->front().first, path->front().second) = kStart;
  corridor.at(path->back().first, path->back().second) = kEnd;
  const auto restricted = maze_shortest_path(corridor);
  return restricted && restricted->size() == path->size();
}

std::vector<PuzzleInstance> maze_generate(const MazeGenOptions& opts, std::uint64_t seed) {
  if (opts.height < 2 || opts.width < 2) throw std::invalid_argument("maze: height and width must be at least 2");
  if (opts.count < 0) throw std::invalid_argument("maze: count must be >= 0");
  if (opts.min_path_len < 1 || opts.min_path_len > opts.height * opts.width - 1) {
    throw std::invalid_argument("maze: min_path_len " + std::to_string(opts.min_path_len) + " is unachievable on " +
                                std::to_string(opts.height) + "x" + std::to_string(opts.width));
  }
  std::mt19937_64 rng(seed);
  std::vector<PuzzleInstance> out;
  std::set<std::vector<int>> seen;
  for (int i = 0; i < opts.count; ++i) {
    bool emitted = false;
    for (int attempt = 0; attempt < opts.attempts_per_maze && !emitted; ++attempt) {
      Grid g = carve(opts.height, opts.width, rng);
      std::vector<Cell> open;
      for (int r = 0; r < g.height; ++r) {
        for (int c = 0; c < g.width; ++c) {
          if (g.at(r, c) == kEmpty) open.emplace_back(r, c);
        }
      }
      const Cell start = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
      const auto dist = distances_from(g, start);
      std::vector<Cell> far;
      for (const auto& cell : open) {
        if (dist[static_cast<std::size_t>(cell.first * g.width + cell.second)] >= opts.min_path_len) far.push_back(cell);
      }
      if (far.empty()) continue;
      const Cell end = far[std::uniform_int_distribution<std::size_t>(0, far.size() - 1)(rng)];
      g.at(start.first, start.second) = kStart;
      g.at(end.first, end.second) = kEnd;
      if (!seen.insert(g.cells).second) continue;
      Grid target = g;
      const auto path = maze_shortest_path(g);
      for (std::size_t k = 1; k + 1 < path->size(); ++k) target.at((*path)[k].first, (*path)[k].second) = kPath;
      PuzzleInstance p;
      p.task = Task::maze;
      p.input = std::move(g);
      p.target = std::move(target);
      p.puzzle_id = i;
      out.push_back(std::move(p));
      emitted = true;
    }
    if (!emitted) throw std::runtime_error("maze: attempt budget exhausted after " + std::to_string(i) + " mazes");
  }
  return out;
}

}  // namespace trm::data
