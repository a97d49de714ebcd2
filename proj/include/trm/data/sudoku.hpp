#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "trm/data/grid.hpp"

namespace trm::data {

// Side of one box: 2 for 4x4, 3 for 9x9.
int sudoku_box(int size);

// True when every filled cell is consistent with row, column and box rules.
bool sudoku_consistent(const Grid& g);
// True when the grid is completely filled and consistent.
bool sudoku_solved(const Grid& g);
// True when `solution` agrees with every clue of `puzzle`.
bool sudoku_extends(const Grid& puzzle, const Grid& solution);

// Number of completions, stopping at `limit`.
int sudoku_count_solutions(const Grid& puzzle, int limit = 2);
// One completion if any exists.
bool sudoku_solve(const Grid& puzzle, Grid& solution);
// Fills the grid using only naked and hidden singles; true when it ends solved.
bool sudoku_solved_by_singles(const Grid& puzzle);

enum class SudokuDifficulty { any, hard };

struct SudokuGenOptions {
  int size = 4;
  int count = 0;
  int min_clues = 4;
  int max_clues = 8;
  SudokuDifficulty difficulty = SudokuDifficulty::any;
  // Fresh solution grids tried per emitted puzzle before giving up.
  int attempts_per_puzzle = 200;
};

// Unique-solution puzzles; target holds the solution. puzzle_id is the
// emission index. Throws std::invalid_argument on infeasible clue ranges and
// std::runtime_error when the attempt budget runs out.
std::vector<PuzzleInstance> sudoku_generate(const SudokuGenOptions& opts, std::uint64_t seed);

// Random validity-preserving shuffle applied identically to input and target.
struct SudokuTransform {
  std::vector<int> digit_map;  // digit_map[d] for d in 1..size; index 0 unused (blank stays blank)
  std::vector<int> row_order;  // output row r takes source row row_order[r]
  std::vector<int> col_order;
  bool transpose = false;

  static SudokuTransform identity(int size);
  static SudokuTransform random(int size, std::mt19937_64& rng);
  Grid apply(const Grid& g) const;
};

PuzzleInstance sudoku_augment(const PuzzleInstance& p, std::uint64_t seed);
PuzzleInstance sudoku_augment(const PuzzleInstance& p, const SudokuTransform& t);

}  // namespace trm::data
