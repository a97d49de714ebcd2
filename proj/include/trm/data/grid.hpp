#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace trm::data {

// Row-major 2-D grid of small integers (digits, maze cells or colors).
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<int> cells;

  Grid() = default;
  Grid(int h, int w, int fill = 0) : height(h), width(w), cells(static_cast<std::size_t>(h * w), fill) {}
  Grid(int h, int w, std::vector<int> values);

  int& at(int r, int c) { return cells[static_cast<std::size_t>(r * width + c)]; }
  int at(int r, int c) const { return cells[static_cast<std::size_t>(r * width + c)]; }
  bool square() const { return height == width; }

  friend bool operator==(const Grid&, const Grid&) = default;
  // Lexicographic over the row-major cells, then the shape.
  friend std::strong_ordering operator<=>(const Grid& a, const Grid& b);
};

std::string to_string(const Grid& g);

enum class Task { sudoku, maze, arc };

std::string to_string(Task t);
Task parse_task(const std::string& s);

// Token ids shared by every task.
inline constexpr std::int32_t kPad = 0;

namespace sudoku_tokens {
inline constexpr std::int32_t kBlank = 1;
// digit d (1..size) maps to d + 1
}

namespace maze_tokens {
inline constexpr std::int32_t kWall = 1;
inline constexpr std::int32_t kEmpty = 2;
inline constexpr std::int32_t kStart = 3;
inline constexpr std::int32_t kEnd = 4;
inline constexpr std::int32_t kPath = 5;
inline constexpr int kVocab = 6;
}  // namespace maze_tokens

// arc: color c (0..9) maps to c + 1
inline constexpr int kArcVocab = 11;
inline constexpr int kArcCanvas = 30;

int sudoku_vocab(int size);

// A (question, answer) pair of grids with its identifiers.
struct PuzzleInstance {
  Task task = Task::sudoku;
  Grid input;
  Grid target;
  std::int64_t puzzle_id = 0;
  std::int64_t augmentation_id = 0;
};

// Per-task layout of a grid on a fixed token canvas.
struct CanvasLayout {
  int canvas_height = 0;
  int canvas_width = 0;
  int offset_row = 0;
  int offset_col = 0;
};

// Row-major flattening onto the canvas; PAD fills unused cells. Throws on
// cells outside the task vocabulary or grids that do not fit.
std::vector<std::int32_t> encode_grid(const Grid& g, Task task, const CanvasLayout& layout);
// Inverse of encode_grid for a known grid size and placement.
Grid decode_grid(const std::vector<std::int32_t>& tokens, Task task, const CanvasLayout& layout, int height, int width);
// ARC predictions: the bounding box of non-PAD tokens, decoded. Empty grid when all PAD.
Grid decode_arc_prediction(const std::vector<std::int32_t>& tokens, int canvas_height, int canvas_width);

std::int32_t cell_to_token(int cell, Task task);
int token_to_cell(std::int32_t token, Task task);

}  // namespace trm::data
