#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shstab/types.hpp"

namespace shstab {

/// Right-hand side x' = f(x, u) of a control system.
using VectorField = std::function<Vector(const Vector& x, const Vector& u)>;

/// A control system with a compact box of admissible inputs.
struct ControlSystem {
  std::string name;
  int state_dim = 0;
  Box input_box;
  VectorField vector_field;

  int input_dim() const { return static_cast<int>(input_box.dim()); }
  Vector operator()(const Vector& x, const Vector& u) const {
    return vector_field(x, u);
  }
};

/// Sampled bounds on f over a ball B_radius x input set.
struct SystemConstants {
  double lipschitz_L_f = 0.0;  // Lipschitz constant of f in x
  double f_bar = 0.0;          // sup |f(x, u)|
  double ball_radius = 0.0;
};

/// x' = (u1, u2, x1 u2 - x2 u1) with u in [-1, 1]^2.
ControlSystem nonholonomic_integrator();

/// Single integrator x' = u in R^dim with u in [-bound, bound]^dim.
ControlSystem single_integrator(int dim = 1, double bound = 1.0);

/// Builds a system by registry name: "nonholonomic" or "quadratic-test"
/// (the single integrator of the given dimension). Throws
/// std::invalid_argument for unknown names.
ControlSystem make_system(const std::string& name, int dim = 1);

/// Uniform grid over `box` with `res` nodes per axis (endpoints included),
/// enumerated in lexicographic order of the node index. Requires res >= 2.
std::vector<Vector> input_grid(const Box& box, int res);

/// Box vertices in lexicographic order (component 0 varies slowest).
std::vector<Vector> box_vertices(const Box& box);

/// Quasi-random estimate of L_f and f_bar on B_radius, each inflated by 1.1.
/// Inputs are taken from a 5-per-axis grid over the input box. Deterministic
/// for a fixed seed. Throws std::invalid_argument if radius <= 0 or
/// sample_count < 2.
SystemConstants estimate_constants(const ControlSystem& sys, double ball_radius,
                                   std::size_t sample_count, std::uint64_t seed);

/// Safety factor applied to every sampled sup (and divided out of every
/// sampled inf) throughout the library.
inline constexpr double kSafetyInflation = 1.1;

}  // namespace shstab
