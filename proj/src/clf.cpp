#include "shstab/clf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "shstab/sampling.hpp"

namespace shstab {
namespace {

// Range of sqrt(a^2 + b^2) over a rectangle.
Interval planar_radius(Interval a, Interval b) {
  auto nearest = [](Interval v) { return v.contains(0.0) ? 0.0 : std::min(std::abs(v.lo), std::abs(v.hi)); };
  const double lo = std::hypot(nearest(a), nearest(b));
  const double hi = std::hypot(a.magnitude(), b.magnitude());
  return {lo, hi};
}

Interval sign_of(Interval v) {
  if (v.lo > 0.0) return 1.0;
  if (v.hi < 0.0) return -1.0;
  return {-1.0, 1.0};
}

std::vector<double> ladder(double mu0, double mu_min) {
  std::vector<double> rungs{mu0};
  while (rungs.back() / 2.0 >= mu_min) rungs.push_back(rungs.back() / 2.0);
  return rungs;
}

double quotient(const Clf& clf, const Vector& x, double vx, const Vector& theta,
                double mu) {
  return (clf(x + mu * theta) - vx) / mu;
}

Interval directional_enclosure(const Clf& clf, const Box& box, const Vector& theta) {
  const auto g = clf.gradient_enclosure(box);
  Interval acc = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) acc = acc + g[i] * Interval(theta[i]);
  return acc;
}

}  // namespace

Clf nonholonomic_clf(double decay_coefficient) {
  Clf clf;
  clf.name = "nonholonomic";
  clf.value = [](const Vector& x) {
    const double rho = std::hypot(x[0], x[1]);
    return x[0] * x[0] + x[1] * x[1] + 2.0 * x[2] * x[2] - 2.0 * std::abs(x[2]) * rho;
  };
  clf.decay_rate = [c = decay_coefficient](const Vector& x) { return c * x.squaredNorm(); };
  // V = rho^2 + 2 t^2 - 2 t rho with rho = |(x1, x2)|, t = |x3|.
  clf.gradient_enclosure = [](const Box& box) {
    const Interval y1 = box.axis(0), y2 = box.axis(1), y3 = box.axis(2);
    const Interval rho = planar_radius(y1, y2);
    const Interval t = abs(y3);
    Interval c1{-1.0, 1.0}, c2{-1.0, 1.0};
    if (rho.lo > 0.0) {
      c1 = intersect(divide(y1, rho), {-1.0, 1.0});
      c2 = intersect(divide(y2, rho), {-1.0, 1.0});
    }
    return IntervalVector{Interval(2.0) * y1 - Interval(2.0) * t * c1,
                          Interval(2.0) * y2 - Interval(2.0) * t * c2,
                          sign_of(y3) * (Interval(4.0) * t - Interval(2.0) * rho)};
  };
  return clf;
}

Clf quadratic_clf(double decay_coefficient) {
  Clf clf;
  clf.name = "quadratic";
  clf.value = [](const Vector& x) { return x.squaredNorm(); };
  clf.decay_rate = [c = decay_coefficient](const Vector& x) { return c * x.squaredNorm(); };
  clf.gradient_enclosure = [](const Box& box) {
    IntervalVector g(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i) g[i] = {2.0 * box.lo[i], 2.0 * box.hi[i]};
    return g;
  };
  return clf;
}

Clf make_clf(const std::string& name, double decay_coefficient) {
  if (name == "nonholonomic") return nonholonomic_clf(decay_coefficient);
  if (name == "quadratic") return quadratic_clf(decay_coefficient);
  throw std::invalid_argument("unknown CLF '" + name + "'");
}

DiniEstimate dini_derivative(const Clf& clf, const Vector& x, const Vector& theta,
                             double mu_min, const DiniOptions& opts) {
  if (!(mu_min > 0.0)) throw std::invalid_argument("dini_derivative: mu_min must be positive");
  DiniEstimate est;
  const double vx = clf(x);
  for (double mu : ladder(opts.mu0, mu_min)) {
    est.quotient_trace.emplace_back(mu, quotient(clf, x, vx, theta, mu));
  }
  const auto& tr = est.quotient_trace;
  const std::size_t first = tr.size() >= 3 ? tr.size() - 3 : 0;
  est.value = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < tr.size(); ++i) est.value = std::min(est.value, tr[i].second);
  est.mu_used = tr.back().first;
  return est;
}

DecayCheck check_decay(const Clf& clf, const ControlSystem& sys, const Vector& x,
                       int input_grid_res, double mu_min, const DiniOptions& opts) {
  if (input_grid_res < 2) throw std::invalid_argument("check_decay: grid resolution must be >= 2");
  DecayCheck out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& u : input_grid(sys.input_box, input_grid_res)) {
    const double d = dini_derivative(clf, x, sys(x, u), mu_min, opts).value;
    if (d < best) {
      best = d;
      out.best_input = u;
    }
  }
  const double w = clf.decay_rate(x);
  out.satisfied = best <= -w;
  out.margin = -best - w;
  return out;
}

double uniformity_mu_at(const Clf& clf, const Vector& y, const Vector& theta,
                        double nu, const ProbeOptions& opts) {
  const auto rungs = ladder(opts.mu0, opts.mu_min);
  std::vector<double> deviation(rungs.size());
  if (opts.method == ProbeMethod::kEnclosure) {
    if (!clf.has_gradient_enclosure()) {
      throw std::invalid_argument("probe_uniformity: CLF has no gradient enclosure");
    }
    const Interval at_point = directional_enclosure(clf, Box(y, y), theta);
    for (std::size_t i = 0; i < rungs.size(); ++i) {
      const Interval seg = directional_enclosure(clf, segment_box(y, y + rungs[i] * theta), theta);
      deviation[i] = std::max(seg.hi - at_point.lo, at_point.hi - seg.lo);
    }
  } else {
    const double vy = clf(y);
    std::vector<double> q(rungs.size());
    for (std::size_t i = 0; i < rungs.size(); ++i) q[i] = quotient(clf, y, vy, theta, rungs[i]);
    double dini = std::numeric_limits<double>::infinity();
    for (std::size_t i = q.size() >= 3 ? q.size() - 3 : 0; i < q.size(); ++i) dini = std::min(dini, q[i]);
    for (std::size_t i = 0; i < q.size(); ++i) deviation[i] = std::abs(q[i] - dini);
  }
  // Every rung at or below the answer must pass.
  double mu = 0.0;
  for (std::size_t i = rungs.size(); i-- > 0;) {
    if (!(deviation[i] <= nu)) break;
    mu = rungs[i];
  }
  return mu;
}

ProbeResult probe_uniformity(const Clf& clf, const Ball& region,
                             std::span<const Vector> directions, double nu,
                             const ProbeOptions& opts) {
  if (!(nu > 0.0)) throw std::invalid_argument("probe_uniformity: nu must be positive");
  if (!(region.radius >= 0.0)) throw std::invalid_argument("probe_uniformity: bad region");
  const int n = static_cast<int>(region.center.size());
  std::vector<Vector> points{region.center};
  if (region.radius > 0.0 && opts.sample_count > 0) {
    for (auto& p : ball_samples(n, region.radius, opts.sample_count, opts.seed)) {
      points.push_back(region.center + p);
    }
  }
  ProbeResult res;
  res.mu = std::numeric_limits<double>::infinity();
  res.mu_unflagged = std::numeric_limits<double>::infinity();
  for (const auto& y : points) {
    for (const auto& theta : directions) {
      const double mu = uniformity_mu_at(clf, y, theta, nu, opts);
      ++res.total_samples;
      if (mu <= 0.0) {
        ++res.flagged_samples;
      } else {
        res.mu_unflagged = std::min(res.mu_unflagged, mu);
      }
      if (mu < res.mu) {
        res.mu = mu;
        res.worst_point = y;
        res.worst_direction = theta;
      }
    }
  }
  if (res.total_samples == 0) {
    res.mu = opts.mu0;
    res.mu_unflagged = opts.mu0;
  } else if (res.flagged_samples == res.total_samples) {
    res.mu_unflagged = 0.0;
  }
  return res;
}

}  // namespace shstab
