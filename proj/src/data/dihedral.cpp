#include "trm/data/dihedral.hpp"

#include <array>
#include <stdexcept>

namespace trm::data {

namespace {

void check_element(int k) {
  if (k < 0 || k > 7) throw std::out_of_range("dihedral element must be in 0..7, got " + std::to_string(k));
}

Grid rotate_clockwise(const Grid& g) {
  Grid out(g.width, g.height);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) out.at(c, g.height - 1 - r) = g.at(r, c);
  }
  return out;
}

Grid mirror_columns(const Grid& g) {
  Grid out(g.height, g.width);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) out.at(r, g.width - 1 - c) = g.at(r, c);
  }
  return out;
}

// Composition table built by acting on an asymmetric probe grid.
const std::array<std::array<int, 8>, 8>& compose_table() {
  static const auto table = [] {
    Grid probe(2, 3, std::vector<int>{0, 1, 2, 3, 4, 5});
    std::array<Grid, 8> images;
    for (int k = 0; k < 8; ++k) images[static_cast<std::size_t>(k)] = dihedral_transform(probe, k);
    std::array<std::array<int, 8>, 8> t{};
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        const Grid ab = dihedral_transform(images[static_cast<std::size_t>(a)], b);
        int found = -1;
        for (int k = 0; k < 8; ++k) {
          if (images[static_cast<std::size_t>(k)] == ab) found = k;
        }
        t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = found;
      }
    }
    return t;
  }();
  return table;
}

}  // namespace

Grid dihedral_transform(const Grid& g, int k, bool fixed_shape) {
  check_element(k);
  const int rotation = k % 4;
  if (fixed_shape && !g.square() && rotation % 2 == 1) {
    throw std::invalid_argument("dihedral element " + std::to_string(k) + " changes the shape of a " +
                                std::to_string(g.height) + "x" + std::to_string(g.width) + " grid");
  }
  Grid out = k >= 4 ? mirror_columns(g) : g;
  for (int i = 0; i < rotation; ++i) out = rotate_clockwise(out);
  return out;
}

int dihedral_inverse(int k) {
  check_element(k);
  if (k >= 4) return k;  // reflections are involutions
  return (4 - k) % 4;
}

int dihedral_compose(int a, int b) {
  check_element(a);
  check_element(b);
  return compose_table()[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

}  // namespace trm::data
