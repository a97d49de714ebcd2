#pragma once

#include "trm/data/grid.hpp"

namespace trm::data {

// Element k = rotation + 4 * flip of the square's symmetry group: mirror the
// columns first when flip is set, then rotate clockwise `rotation` quarter turns.
// k = 0 is the identity. With fixed_shape, shape-changing elements on a
// non-square grid are rejected.
Grid dihedral_transform(const Grid& g, int k, bool fixed_shape = false);

// transform(transform(g, k), dihedral_inverse(k)) == g
int dihedral_inverse(int k);
// transform(transform(g, a), b) == transform(g, dihedral_compose(a, b))
int dihedral_compose(int a, int b);

}  // namespace trm::data
