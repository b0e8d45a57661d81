#include "shstab/sampling.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace shstab {
namespace {

constexpr std::array<int, 24> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19,
                                         23, 29, 31, 37, 41, 43, 47, 53,
                                         59, 61, 67, 71, 73, 79, 83, 89};

double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

std::vector<double> rotation(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> shift(dim);
  for (auto& s : shift) s = unif(rng);
  return shift;
}

}  // namespace

std::vector<Vector> halton_cube(int dim, std::size_t count, std::uint64_t seed) {
  if (dim < 1 || dim > static_cast<int>(kPrimes.size())) {
    throw std::invalid_argument("halton_cube: unsupported dimension");
  }
  const auto shift = rotation(dim, seed);
  std::vector<Vector> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector p(dim);
    for (int d = 0; d < dim; ++d) {
      double v = radical_inverse(i + 1, kPrimes[d]) + shift[d];
      p[d] = v - std::floor(v);
    }
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<Vector> ball_samples(int dim, double radius, std::size_t count,
                                 std::uint64_t seed) {
  auto points = halton_cube(dim, count, seed);
  for (auto& p : points) {
    Vector z = 2.0 * p.array() - 1.0;
    const double n2 = z.norm();
    if (n2 > 0.0) z *= z.lpNorm<Eigen::Infinity>() / n2;
    p = radius * z;
  }
  return points;
}

std::vector<Vector> sphere_directions(int dim, std::size_t count,
                                      std::uint64_t seed) {
  std::vector<Vector> dirs;
  if (dim == 1) {
    dirs.push_back(Vector::Constant(1, -1.0));
    dirs.push_back(Vector::Constant(1, 1.0));
    return dirs;
  }
  dirs.reserve(count);
  if (dim == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / count;
      Vector d(2);
      d << std::cos(phi), std::sin(phi);
      dirs.push_back(std::move(d));
    }
    return dirs;
  }
  if (dim == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double offset = 2.0 * std::numbers::pi * rotation(1, seed)[0];
    for (std::size_t i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(count);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * static_cast<double>(i) + offset;
      Vector d(3);
      d << r * std::cos(phi), r * std::sin(phi), z;
      dirs.push_back(std::move(d));
    }
    return dirs;
  }
  // Box-Muller on Halton pairs gives Gaussian points; normalize them.
  const int pairs = (dim + 1) / 2;
  auto cube = halton_cube(2 * pairs, count, seed);
  for (auto& c : cube) {
    Vector d(dim);
    for (int k = 0; k < dim; ++k) {
      const double u1 = std::max(c[2 * (k / 2)], 1e-300);
      const double u2 = c[2 * (k / 2) + 1];
      const double rad = std::sqrt(-2.0 * std::log(u1));
      d[k] = (k % 2 == 0) ? rad * std::cos(2.0 * std::numbers::pi * u2)
                          : rad * std::sin(2.0 * std::numbers::pi * u2);
    }
    const double n = d.norm();
    if (n > 0.0) dirs.push_back(d / n);
  }
  return dirs;
}

std::vector<double> anchored_geometric_grid(double anchor, double lo, double hi,
                                            double ratio) {
  if (!(anchor > 0.0 && lo > 0.0 && hi > lo && ratio > 1.0)) {
    throw std::invalid_argument("anchored_geometric_grid: invalid arguments");
  }
  const double lr = std::log(ratio);
  const auto j_lo = static_cast<long>(std::ceil(std::log(lo / anchor) / lr));
  const auto j_hi = static_cast<long>(std::floor(std::log(hi / anchor) / lr));
  std::vector<double> grid;
  grid.push_back(lo);
  for (long j = j_lo; j <= j_hi; ++j) {
    const double s = anchor * std::pow(ratio, static_cast<double>(j));
    if (s > grid.back() && s < hi) grid.push_back(s);
  }
  grid.push_back(hi);
  return grid;
}

}  // namespace shstab
