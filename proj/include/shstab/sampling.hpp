#pragma once

#include <cstdint>
#include <vector>

#include "shstab/types.hpp"

namespace shstab {

// Deterministic quasi-random point sets shared by the constant estimators.
// All generators are seeded Halton sequences with a Cranley-Patterson
// rotation, so equal seeds give equal samples on every platform.

/// `count` points in the unit cube [0,1)^dim.
std::vector<Vector> halton_cube(int dim, std::size_t count, std::uint64_t seed);

/// `count` points in the closed ball of radius `radius` centred at the origin.
/// Points are radial images of cube points, so scaling the radius scales the
/// sample set.
std::vector<Vector> ball_samples(int dim, double radius, std::size_t count,
                                 std::uint64_t seed);

/// `count` unit vectors. Exact for dim 1 (two points) and dim 2 (equally
/// spaced angles); a Fibonacci lattice in dim 3; normalized Halton-Gaussian
/// points otherwise.
std::vector<Vector> sphere_directions(int dim, std::size_t count,
                                      std::uint64_t seed);

/// Geometric radius grid anchored at `anchor`: every anchor * ratio^j lying in
/// [lo, hi], plus lo and hi themselves. Strictly increasing.
std::vector<double> anchored_geometric_grid(double anchor, double lo, double hi,
                                            double ratio);

}  // namespace shstab
