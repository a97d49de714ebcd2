#pragma once

// Reference implementations that share no code with the library.

#include <algorithm>
#include <queue>
#include <set>
#include <vector>

#include "trm/data/grid.hpp"

namespace trm::testing {

// Plain cell-order backtracking solution counter.
inline int naive_count(data::Grid& g, int limit) {
  const int n = g.height;
  const int box = n == 4 ? 2 : 3;
  for (int i = 0; i < n * n; ++i) {
    if (g.cells[static_cast<std::size_t>(i)] != 0) continue;
    const int r = i / n, c = i % n;
    int total = 0;
    for (int d = 1; d <= n && total < limit; ++d) {
      bool ok = true;
      for (int k = 0; k < n && ok; ++k) {
        ok = g.at(r, k) != d && g.at(k, c) != d && g.at((r / box) * box + k / box, (c / box) * box + k % box) != d;
      }
      if (!ok) continue;
      g.at(r, c) = d;
      total += naive_count(g, limit - total);
      g.at(r, c) = 0;
    }
    return total;
  }
  return 1;
}

// Every row, column and box holds each digit exactly once.
inline bool valid_solution(const data::Grid& g) {
  const int n = g.height;
  const int box = n == 4 ? 2 : 3;
  for (int u = 0; u < n; ++u) {
    std::set<int> row, col, blk;
    for (int k = 0; k < n; ++k) {
      row.insert(g.at(u, k));
      col.insert(g.at(k, u));
      blk.insert(g.at((u / box) * box + k / box, (u % box) * box + k % box));
    }
    for (const auto* s : {&row, &col, &blk}) {
      if (s->size() != static_cast<std::size_t>(n) || *s->begin() != 1 || *s->rbegin() != n) return false;
    }
  }
  return true;
}

inline bool extends(const data::Grid& puzzle, const data::Grid& solution) {
  for (std::size_t i = 0; i < puzzle.cells.size(); ++i) {
    if (puzzle.cells[i] != 0 && puzzle.cells[i] != solution.cells[i]) return false;
  }
  return true;
}

// Moves on a shortest START to END walk, -1 if none. With path_only the walk
// may use only PATH cells and the END cell.
inline int bfs_moves(const data::Grid& g, bool path_only = false) {
  namespace mt = data::maze_tokens;
  int start = -1, end = -1;
  for (int i = 0; i < g.height * g.width; ++i) {
    if (g.cells[static_cast<std::size_t>(i)] == mt::kStart) start = i;
    if (g.cells[static_cast<std::size_t>(i)] == mt::kEnd) end = i;
  }
  if (start < 0 || end < 0) return -1;
  std::vector<int> dist(g.cells.size(), -1);
  std::queue<int> q;
  q.push(start);
  dist[static_cast<std::size_t>(start)] = 0;
  while (!q.empty()) {
    const int cur = q.front();
    q.pop();
    const int r = cur / g.width, c = cur % g.width;
    const int dr[] = {1, -1, 0, 0}, dc[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= g.height || nc >= g.width) continue;
      const int ni = nr * g.width + nc;
      const int v = g.cells[static_cast<std::size_t>(ni)];
      const bool open = path_only ? (v == mt::kPath || v == mt::kEnd) : v != mt::kWall;
      if (!open || dist[static_cast<std::size_t>(ni)] >= 0) continue;
      dist[static_cast<std::size_t>(ni)] = dist[static_cast<std::size_t>(cur)] + 1;
      q.push(ni);
    }
  }
  return dist[static_cast<std::size_t>(end)];
}

inline bool grid_less(const data::Grid& a, const data::Grid& b) {
  if (a.cells != b.cells) return std::lexicographical_compare(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end());
  return std::pair(a.height, a.width) < std::pair(b.height, b.width);
}

// Most frequent candidate by pairwise counting; ties go to the smaller grid.
inline std::pair<data::Grid, std::size_t> brute_vote(const std::vector<data::Grid>& cands) {
  std::size_t best_count = 0;
  data::Grid best;
  for (const auto& a : cands) {
    std::size_t count = 0;
    for (const auto& b : cands) count += a == b;
    if (count > best_count || (count == best_count && grid_less(a, best))) {
      best_count = count;
      best = a;
    }
  }
  return {best, best_count};
}

// Score of one input: the target is among the first `attempts` distinct candidates.
inline double brute_score(const std::vector<std::vector<data::Grid>>& ranked, const std::vector<data::Grid>& targets,
                          int attempts) {
  double hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    std::vector<data::Grid> tried;
    for (const auto& g : ranked[i]) {
      if (static_cast<int>(tried.size()) == attempts) break;
      if (std::find(tried.begin(), tried.end(), g) == tried.end()) tried.push_back(g);
    }
    hits += std::find(tried.begin(), tried.end(), targets[i]) != tried.end();
  }
  return ranked.empty() ? 0.0 : hits / static_cast<double>(ranked.size());
}

}  // namespace trm::testing
