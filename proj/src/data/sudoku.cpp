#include "trm/data/sudoku.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace trm::data {

namespace {

int popcount(unsigned v) { return __builtin_popcount(v); }

// Bitmask bookkeeping for one search.
struct Masks {
  int size = 0;
  int box = 0;
  std::vector<unsigned> row, col, blk;

  explicit Masks(const Grid& g) : size(g.height), box(sudoku_box(g.height)), row(size), col(size), blk(size) {}
  int block_of(int r, int c) const { return (r / box) * box + c / box; }
  unsigned used(int r, int c) const { return row[r] | col[c] | blk[block_of(r, c)]; }
  bool place(int r, int c, int d) {
    const unsigned bit = 1u << d;
    if (used(r, c) & bit) return false;
    row[r] |= bit;
    col[c] |= bit;
    blk[block_of(r, c)] |= bit;
    return true;
  }
  void remove(int r, int c, int d) {
    const unsigned bit = ~(1u << d);
    row[r] &= bit;
    col[c] &= bit;
    blk[block_of(r, c)] &= bit;
  }
  unsigned full() const { return ((1u << (size + 1)) - 1) & ~1u; }
};

void check_shape(const Grid& g) {
  if (!g.square() || (g.height != 4 && g.height != 9)) {
    throw std::invalid_argument("sudoku grids must be 4x4 or 9x9");
  }
}

// Counts completions up to limit; records the first one into `first` when given.
int search(Grid& g, Masks& m, int limit, Grid* first, std::mt19937_64* shuffle) {
  int best = -1;
  unsigned best_free = 0;
  int best_count = 100;
  for (int i = 0; i < g.height * g.width; ++i) {
    if (g.cells[static_cast<std::size_t>(i)] != 0) continue;
    const int r = i / g.width, c = i % g.width;
    const unsigned free = m.full() & ~m.used(r, c);
    const int n = popcount(free);
    if (n < best_count) {
      best = i;
      best_free = free;
      best_count = n;
      if (n <= 1) break;
    }
  }
  if (best < 0) {
    if (first && first->cells.empty()) *first = g;
    return 1;
  }
  if (best_count == 0) return 0;
  std::vector<int> digits;
  for (int d = 1; d <= g.height; ++d) {
    if (best_free & (1u << d)) digits.push_back(d);
  }
  if (shuffle) std::shuffle(digits.begin(), digits.end(), *shuffle);
  const int r = best / g.width, c = best % g.width;
  int total = 0;
  for (int d : digits) {
    m.place(r, c, d);
    g.cells[static_cast<std::size_t>(best)] = d;
    total += search(g, m, limit - total, first, shuffle);
    g.cells[static_cast<std::size_t>(best)] = 0;
    m.remove(r, c, d);
    if (total >= limit) break;
  }
  return total;
}

bool load_masks(const Grid& g, Masks& m) {
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const int d = g.at(r, c);
      if (d == 0) continue;
      if (d < 0 || d > g.height || !m.place(r, c, d)) return false;
    }
  }
  return true;
}

Grid random_solution(int size, std::mt19937_64& rng) {
  Grid g(size, size);
  Masks m(g);
  Grid solution;
  search(g, m, 1, &solution, &rng);
  return solution;
}

std::vector<int> block_permutation(int size, std::mt19937_64& rng) {
  const int box = sudoku_box(size);
  std::vector<int> bands(static_cast<std::size_t>(box));
  std::iota(bands.begin(), bands.end(), 0);
  std::shuffle(bands.begin(), bands.end(), rng);
  std::vector<int> order;
  for (int band : bands) {
    std::vector<int> within(static_cast<std::size_t>(box));
    std::iota(within.begin(), within.end(), 0);
    std::shuffle(within.begin(), within.end(), rng);
    for (int w : within) order.push_back(band * box + w);
  }
  return order;
}

}  // namespace

int sudoku_box(int size) {
  if (size == 4) return 2;
  if (size == 9) return 3;
  throw std::invalid_argument("unsupported sudoku size " + std::to_string(size));
}

bool sudoku_consistent(const Grid& g) {
  check_shape(g);
  Masks m(g);
  return load_masks(g, m);
}

bool sudoku_solved(const Grid& g) {
  return sudoku_consistent(g) && std::none_of(g.cells.begin(), g.cells.end(), [](int v) { return v == 0; });
}

bool sudoku_extends(const Grid& puzzle, const Grid& solution) {
  if (puzzle.height != solution.height || puzzle.width != solution.width) return false;
  for (std::size_t i = 0; i < puzzle.cells.size(); ++i) {
    if (puzzle.cells[i] != 0 && puzzle.cells[i] != solution.cells[i]) return false;
  }
  return true;
}

int sudoku_count_solutions(const Grid& puzzle, int limit) {
  check_shape(puzzle);
  Grid g = puzzle;
  Masks m(g);
  if (!load_masks(g, m)) return 0;
  return search(g, m, limit, nullptr, nullptr);
}

bool sudoku_solve(const Grid& puzzle, Grid& solution) {
  check_shape(puzzle);
  Grid g = puzzle;
  Masks m(g);
  if (!load_masks(g, m)) return false;
  Grid first;
  if (search(g, m, 1, &first, nullptr) == 0) return false;
  solution = first;
  return true;
}

bool sudoku_solved_by_singles(const Grid& puzzle) {
  check_shape(puzzle);
  Grid g = puzzle;
  Masks m(g);
  if (!load_masks(g, m)) return false;
  const int n = g.height, box = sudoku_box(n);
  bool progress = true;
  while (progress) {
    progress = false;
    // naked singles
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if (g.at(r, c) != 0) continue;
        const unsigned free = m.full() & ~m.used(r, c);
        if (free == 0) return false;
        if (popcount(free) == 1) {
          const int d = __builtin_ctz(free);
          g.at(r, c) = d;
          m.place(r, c, d);
          progress = true;
        }
      }
    }
    // hidden singles over rows, columns and boxes
    for (int unit = 0; unit < 3 * n; ++unit) {
      for (int d = 1; d <= n; ++d) {
        int hits = 0, hr = -1, hc = -1;
        bool present = false;
        for (int k = 0; k < n; ++k) {
          int r, c;
          if (unit < n) {
            r = unit, c = k;
          } else if (unit < 2 * n) {
            r = k, c = unit - n;
          } else {
            const int b = unit - 2 * n;
            r = (b / box) * box + k / box;
            c = (b % box) * box + k % box;
          }
          if (g.at(r, c) == d) present = true;
          if (g.at(r, c) == 0 && !(m.used(r, c) & (1u << d))) {
            ++hits;
            hr = r;
            hc = c;
          }
        }
        if (!present && hits == 1) {
          g.at(hr, hc) = d;
          m.place(hr, hc, d);
          progress = true;
        }
      }
    }
  }
  return sudoku_solved(g);
}

std::vector<PuzzleInstance> sudoku_generate(const SudokuGenOptions& opts, std::uint64_t seed) {
  const int size = opts.size;
  sudoku_box(size);
  const int min_feasible = size == 4 ? 4 : 17;
  if (opts.count < 0) throw std::invalid_argument("sudoku: count must be >= 0");
  if (opts.min_clues > opts.max_clues || opts.max_clues > size * size || opts.max_clues < min_feasible ||
      opts.min_clues < 0) {
    throw std::invalid_argument("sudoku: infeasible clue range [" + std::to_string(opts.min_clues) + ", " +
                                std::to_string(opts.max_clues) + "] for size " + std::to_string(size));
  }
  std::mt19937_64 rng(seed);
  std::vector<PuzzleInstance> out;
  std::set<std::vector<int>> seen;
  for (int i = 0; i < opts.count; ++i) {
    bool emitted = false;
    for (int attempt = 0; attempt < opts.attempts_per_puzzle && !emitted; ++attempt) {
      const Grid solution = random_solution(size, rng);
      const int target = std::uniform_int_distribution<int>(opts.min_clues, opts.max_clues)(rng);
      Grid puzzle = solution;
      std::vector<int> order(static_cast<std::size_t>(size * size));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      int clues = size * size;
      for (int cell : order) {
        if (clues <= target) break;
        const int saved = puzzle.cells[static_cast<std::size_t>(cell)];
        puzzle.cells[static_cast<std::size_t>(cell)] = 0;
        if (sudoku_count_solutions(puzzle, 2) == 1) {
          --clues;
        } else {
          puzzle.cells[static_cast<std::size_t>(cell)] = saved;
        }
      }
      if (clues < opts.min_clues || clues > opts.max_clues) continue;
      if (opts.difficulty == SudokuDifficulty::hard && sudoku_solved_by_singles(puzzle)) continue;
      if (!seen.insert(puzzle.cells).second) continue;
      PuzzleInstance p;
      p.task = Task::sudoku;
      p.input = puzzle;
      p.target = solution;
      p.puzzle_id = i;
      out.push_back(std::move(p));
      emitted = true;
    }
    if (!emitted) {
      throw std::runtime_error("sudoku: attempt budget exhausted after " + std::to_string(i) + " puzzles");
    }
  }
  return out;
}

SudokuTransform SudokuTransform::identity(int size) {
  SudokuTransform t;
  t.digit_map.resize(static_cast<std::size_t>(size + 1));
  std::iota(t.digit_map.begin(), t.digit_map.end(), 0);
  t.row_order.resize(static_cast<std::size_t>(size));
  std::iota(t.row_order.begin(), t.row_order.end(), 0);
  t.col_order = t.row_order;
  return t;
}

SudokuTransform SudokuTransform::random(int size, std::mt19937_64& rng) {
  SudokuTransform t = identity(size);
  std::shuffle(t.digit_map.begin() + 1, t.digit_map.end(), rng);
  t.row_order = block_permutation(size, rng);
  t.col_order = block_permutation(size, rng);
  t.transpose = std::bernoulli_distribution(0.5)(rng);
  return t;
}

Grid SudokuTransform::apply(const Grid& g) const {
  const int n = g.height;
  if (static_cast<int>(row_order.size()) != n || static_cast<int>(col_order.size()) != n ||
      static_cast<int>(digit_map.size()) != n + 1) {
    throw std::invalid_argument("sudoku transform size does not match grid");
  }
  Grid out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int v = digit_map[static_cast<std::size_t>(
          g.at(row_order[static_cast<std::size_t>(r)], col_order[static_cast<std::size_t>(c)]))];
      if (transpose) {
        out.at(c, r) = v;
      } else {
        out.at(r, c) = v;
      }
    }
  }
  return out;
}

PuzzleInstance sudoku_augment(const PuzzleInstance& p, const SudokuTransform& t) {
  PuzzleInstance out = p;
  out.input = t.apply(p.input);
  out.target = t.apply(p.target);
  return out;
}

PuzzleInstance sudoku_augment(const PuzzleInstance& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sudoku_augment(p, SudokuTransform::random(p.input.height, rng));
}

}  // namespace trm::data
