#include "shstab/systems.hpp"

#include <stdexcept>

#include "shstab/sampling.hpp"

namespace shstab {

ControlSystem nonholonomic_integrator() {
  ControlSystem sys;
  sys.name = "nonholonomic";
  sys.state_dim = 3;
  sys.input_box = Box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  sys.vector_field = [](const Vector& x, const Vector& u) {
    Vector dx(3);
    dx << u[0], u[1], x[0] * u[1] - x[1] * u[0];
    return dx;
  };
  return sys;
}

ControlSystem single_integrator(int dim, double bound) {
  if (dim < 1 || !(bound > 0.0)) {
    throw std::invalid_argument("single_integrator: dim >= 1 and bound > 0 required");
  }
  ControlSystem sys;
  sys.name = "quadratic-test";
  sys.state_dim = dim;
  sys.input_box = Box(Vector::Constant(dim, -bound), Vector::Constant(dim, bound));
  sys.vector_field = [](const Vector&, const Vector& u) { return u; };
  return sys;
}

ControlSystem make_system(const std::string& name, int dim) {
  if (name == "nonholonomic") return nonholonomic_integrator();
  if (name == "quadratic-test") return single_integrator(dim);
  throw std::invalid_argument("unknown system '" + name + "'");
}

std::vector<Vector> input_grid(const Box& box, int res) {
  if (res < 2) throw std::invalid_argument("input_grid: resolution must be >= 2");
  const auto m = box.dim();
  std::vector<Vector> grid;
  std::vector<int> idx(m, 0);
  while (true) {
    Vector u(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      // Endpoints are taken verbatim so vertices are exact.
      if (idx[i] == 0) {
        u[i] = box.lo[i];
      } else if (idx[i] == res - 1) {
        u[i] = box.hi[i];
      } else {
        u[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (res - 1);
      }
    }
    grid.push_back(std::move(u));
    Eigen::Index k = m - 1;
    while (k >= 0 && ++idx[k] == res) idx[k--] = 0;
    if (k < 0) break;
  }
  return grid;
}

std::vector<Vector> box_vertices(const Box& box) { return input_grid(box, 2); }

SystemConstants estimate_constants(const ControlSystem& sys, double ball_radius,
                                   std::size_t sample_count, std::uint64_t seed) {
  if (!(ball_radius > 0.0)) {
    throw std::invalid_argument("estimate_constants: ball_radius must be positive");
  }
  if (sample_count < 2) {
    throw std::invalid_argument("estimate_constants: sample_count must be >= 2");
  }
  const int n = sys.state_dim;
  const auto inputs = input_grid(sys.input_box, 5);
  auto points = ball_samples(n, ball_radius, sample_count, seed);
  // Boundary points carry the sup for most systems; add a shell.
  for (const auto& d : sphere_directions(n, std::max<std::size_t>(sample_count / 4, 2), seed + 1)) {
    points.push_back(ball_radius * d);
  }

  double f_max = 0.0;
  double quotient_max = 0.0;
  const double local_step = 1e-3 * ball_radius;
  const auto offsets = sphere_directions(n, 64, seed + 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vector& x = points[i];
    const Vector& y = points[(i + 1) % points.size()];
    Vector z = x + local_step * offsets[i % offsets.size()];
    if (z.norm() > ball_radius) z = x - local_step * offsets[i % offsets.size()];
    const double dxy = (x - y).norm();
    const double dxz = (x - z).norm();
    for (const auto& u : inputs) {
      const Vector fx = sys(x, u);
      f_max = std::max(f_max, fx.norm());
      if (dxy > 0.0) quotient_max = std::max(quotient_max, (fx - sys(y, u)).norm() / dxy);
      if (dxz > 0.0) quotient_max = std::max(quotient_max, (fx - sys(z, u)).norm() / dxz);
    }
  }
  return {kSafetyInflation * quotient_max, kSafetyInflation * f_max, ball_radius};
}

}  // namespace shstab
