#include "trm/data/grid.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace trm::data {

Grid::Grid(int h, int w, std::vector<int> values) : height(h), width(w), cells(std::move(values)) {
  if (h < 0 || w < 0 || cells.size() != static_cast<std::size_t>(h * w)) {
    throw std::invalid_argument("grid cell count does not match " + std::to_string(h) + "x" + std::to_string(w));
  }
}

std::strong_ordering operator<=>(const Grid& a, const Grid& b) {
  if (auto c = std::lexicographical_compare_three_way(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end());
      c != 0) {
    return c;
  }
  if (auto c = a.height <=> b.height; c != 0) return c;
  return a.width <=> b.width;
}

std::string to_string(const Grid& g) {
  std::ostringstream os;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) os << (c ? " " : "") << g.at(r, c);
    os << '\n';
  }
  return os.str();
}

std::string to_string(Task t) {
  switch (t) {
    case Task::sudoku: return "sudoku";
    case Task::maze: return "maze";
    case Task::arc: return "arc";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  if (s == "sudoku") return Task::sudoku;
  if (s == "maze") return Task::maze;
  if (s == "arc") return Task::arc;
  throw std::invalid_argument("unknown task '" + s + "' (expected sudoku|maze|arc)");
}

int sudoku_vocab(int size) { return size + 2; }

std::int32_t cell_to_token(int cell, Task task) {
  switch (task) {
    case Task::sudoku:
      if (cell < 0 || cell > 9) break;
      return cell == 0 ? sudoku_tokens::kBlank : cell + 1;
    case Task::maze:
      if (cell < maze_tokens::kWall || cell > maze_tokens::kPath) break;
      return cell;
    case Task::arc:
      if (cell < 0 || cell > 9) break;
      return cell + 1;
  }
  throw std::out_of_range("cell value " + std::to_string(cell) + " is outside the " + to_string(task) + " vocabulary");
}

int token_to_cell(std::int32_t token, Task task) {
  switch (task) {
    case Task::sudoku:
      if (token < sudoku_tokens::kBlank || token > 10) break;
      return token == sudoku_tokens::kBlank ? 0 : token - 1;
    case Task::maze:
      if (token < maze_tokens::kWall || token > maze_tokens::kPath) break;
      return token;
    case Task::arc:
      if (token < 1 || token > 10) break;
      return token - 1;
  }
  throw std::out_of_range("token " + std::to_string(token) + " is outside the " + to_string(task) + " vocabulary");
}

std::vector<std::int32_t> encode_grid(const Grid& g, Task task, const CanvasLayout& layout) {
  if (g.height + layout.offset_row > layout.canvas_height || g.width + layout.offset_col > layout.canvas_width ||
      layout.offset_row < 0 || layout.offset_col < 0) {
    throw std::out_of_range("grid " + std::to_string(g.height) + "x" + std::to_string(g.width) +
                            " does not fit the canvas");
  }
  if (task == Task::sudoku) {
    for (int v : g.cells) {
      if (v < 0 || v > g.height) throw std::out_of_range("sudoku digit " + std::to_string(v) + " out of range");
    }
  }
  std::vector<std::int32_t> out(static_cast<std::size_t>(layout.canvas_height * layout.canvas_width), kPad);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      out[static_cast<std::size_t>((r + layout.offset_row) * layout.canvas_width + c + layout.offset_col)] =
          cell_to_token(g.at(r, c), task);
    }
  }
  return out;
}

Grid decode_grid(const std::vector<std::int32_t>& tokens, Task task, const CanvasLayout& layout, int height,
                 int width) {
  if (tokens.size() != static_cast<std::size_t>(layout.canvas_height * layout.canvas_width)) {
    throw std::invalid_argument("decode_grid: token count does not match canvas");
  }
  Grid g(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      g.at(r, c) = token_to_cell(
          tokens[static_cast<std::size_t>((r + layout.offset_row) * layout.canvas_width + c + layout.offset_col)], task);
    }
  }
  return g;
}

Grid decode_arc_prediction(const std::vector<std::int32_t>& tokens, int canvas_height, int canvas_width) {
  int r0 = canvas_height, r1 = -1, c0 = canvas_width, c1 = -1;
  for (int r = 0; r < canvas_height; ++r) {
    for (int c = 0; c < canvas_width; ++c) {
      if (tokens[static_cast<std::size_t>(r * canvas_width + c)] != kPad) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
    }
  }
  if (r1 < 0) return Grid(0, 0);
  Grid g(r1 - r0 + 1, c1 - c0 + 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const auto t = tokens[static_cast<std::size_t>(r * canvas_width + c)];
      // PAD holes inside the box decode as background
      g.at(r - r0, c - c0) = t == kPad ? 0 : std::min(9, std::max(0, t - 1));
    }
  }
  return g;
}

}  // namespace trm::data
