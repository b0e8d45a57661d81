#include "shstab/margins.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "shstab/sampling.hpp"

namespace shstab {
namespace {

void require_increasing(std::span<const double> grid, const char* what) {
  if (grid.empty()) throw std::invalid_argument(fmt::format("{}: empty grid", what));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > (i == 0 ? 0.0 : grid[i - 1]))) {
      throw std::invalid_argument(fmt::format("{}: grid must be positive and strictly increasing", what));
    }
  }
}

std::vector<double> geometric(double lo, double hi, double ratio) {
  std::vector<double> g;
  for (double v = lo; v < hi; v *= ratio) g.push_back(v);
  g.push_back(hi);
  return g;
}

std::vector<double> merged(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

struct Chain {
  std::vector<BoundTerm>& terms;
  double take(const std::string& bound, const std::string& name, double value) {
    terms.push_back({bound, name, value});
    return value;
  }
};

double positive_or_throw(const std::vector<BoundTerm>& terms, const std::string& bound, double value) {
  if (value > 0.0 && std::isfinite(value)) return value;
  for (const auto& t : terms) {
    if (t.bound == bound && !(t.value > 0.0)) {
      throw InfeasibleCertificate(t.name, fmt::format("certificate infeasible: {} forces {} = {:g}",
                                                      t.name, bound, t.value));
    }
  }
  throw InfeasibleCertificate(bound, fmt::format("certificate infeasible: {} = {:g}", bound, value));
}

}  // namespace

double RhoLambda::rho(double s) const {
  auto it = std::upper_bound(radii.begin(), radii.end(), s);
  if (it == radii.begin()) throw std::out_of_range("rho: radius below the table");
  return sphere_min[std::distance(radii.begin(), it) - 1];
}

double RhoLambda::lambda(double v) const {
  double out = 0.0;
  for (std::size_t i = 0; i < radii.size() && sphere_max[i] < v; ++i) out = radii[i];
  return out;
}

double RhoLambda::ball_sup(double s) const {
  auto it = std::lower_bound(radii.begin(), radii.end(), s);
  if (it == radii.end()) throw std::out_of_range("ball_sup: radius above the table");
  return sphere_max[std::distance(radii.begin(), it)];
}

RhoLambda rho_lambda(const Clf& clf, int dim, std::span<const double> radius_grid,
                     std::size_t direction_count, std::uint64_t seed) {
  require_increasing(radius_grid, "rho_lambda");
  const auto dirs = sphere_directions(dim, direction_count, seed);
  RhoLambda t;
  t.radii.assign(radius_grid.begin(), radius_grid.end());
  t.sphere_min.resize(t.radii.size());
  t.sphere_max.resize(t.radii.size());
  for (std::size_t i = 0; i < t.radii.size(); ++i) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& d : dirs) {
      const double v = clf(t.radii[i] * d);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    t.sphere_min[i] = lo;
    t.sphere_max[i] = hi;
  }
  for (std::size_t i = t.radii.size() - 1; i-- > 0;) t.sphere_min[i] = std::min(t.sphere_min[i], t.sphere_min[i + 1]);
  for (std::size_t i = 1; i < t.radii.size(); ++i) t.sphere_max[i] = std::max(t.sphere_max[i], t.sphere_max[i - 1]);
  return t;
}

double ModulusTable::at(double d) const {
  if (d <= 0.0) return 0.0;
  auto it = std::lower_bound(distances.begin(), distances.end(), d);
  if (it == distances.end()) return std::numeric_limits<double>::infinity();
  return oscillation[std::distance(distances.begin(), it)];
}

double ModulusTable::inverse(double eps) const {
  double out = 0.0;
  for (std::size_t i = 0; i < distances.size() && oscillation[i] <= eps; ++i) out = distances[i];
  return out;
}

ModulusTable modulus_of_continuity(const Clf& clf, int dim, double ball_radius,
                                   std::span<const double> distance_grid,
                                   std::size_t pair_count, std::uint64_t seed) {
  require_increasing(distance_grid, "modulus_of_continuity");
  if (!(ball_radius > 0.0)) throw std::invalid_argument("modulus_of_continuity: radius must be positive");
  auto points = ball_samples(dim, ball_radius, pair_count, seed);
  // The steepest part of a coercive V sits on the boundary.
  for (const auto& d : sphere_directions(dim, std::max<std::size_t>(pair_count / 4, 2), seed + 1)) {
    points.push_back(ball_radius * d);
  }
  const auto dirs = sphere_directions(dim, 97, seed + 2);
  std::vector<double> values(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) values[i] = clf(points[i]);

  ModulusTable t;
  t.distances.assign(distance_grid.begin(), distance_grid.end());
  t.oscillation.resize(t.distances.size());
  for (std::size_t j = 0; j < t.distances.size(); ++j) {
    const double d = t.distances[j];
    double osc = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vector& step = dirs[i % dirs.size()];
      Vector y = points[i] + d * step;
      if (y.norm() > ball_radius) y = points[i] - d * step;
      if (y.norm() > ball_radius) continue;
      osc = std::max(osc, std::abs(clf(y) - values[i]));
    }
    t.oscillation[j] = kSafetyInflation * osc;
  }
  for (std::size_t j = 1; j < t.oscillation.size(); ++j) {
    t.oscillation[j] = std::max(t.oscillation[j], t.oscillation[j - 1]);
  }
  return t;
}

MarginCertificate build_certificate(const ControlSystem& sys, const Clf& clf, double R, double r,
                                    const CertificateOptions& opts) {
  if (!(r > 0.0 && r < R)) throw std::invalid_argument("build_certificate: need 0 < r < R");
  const int n = sys.state_dim;
  MarginCertificate c;
  c.system_name = sys.name;
  c.clf_name = clf.name;
  c.R = R;
  c.r = r;
  Chain chain{c.terms};

  constexpr int kMaxGrowth = 60;
  std::vector<double> candidates{R};
  for (int j = 1; j <= kMaxGrowth; ++j) candidates.push_back(R * std::pow(kSafetyInflation, j));
  const auto grid = merged(anchored_geometric_grid(r, 1e-3 * r, candidates.back(), opts.radius_ratio),
                           candidates);
  const RhoLambda table = rho_lambda(clf, n, grid, opts.sphere_directions, opts.seed);

  c.v_bar = kSafetyInflation * table.ball_sup(R);
  for (int j = 1; j <= kMaxGrowth && c.R_star == 0.0; ++j) {
    if (table.rho(candidates[j]) > c.v_bar) c.R_star = candidates[j];
  }
  if (c.R_star == 0.0) {
    throw InfeasibleCertificate("R_star", "certificate infeasible: no R_star with rho(R_star) > v_bar");
  }
  c.theta = table.rho(c.R_star);
  c.v_star_cap = kSafetyInflation * table.ball_sup(c.R_star);
  c.v_star = table.rho(r);
  c.r_star = table.lambda(c.v_star / 4.0);
  if (!(c.v_star > 0.0)) throw InfeasibleCertificate("v_star", "certificate infeasible: v_star = 0");
  if (!(c.r_star > 0.0)) throw InfeasibleCertificate("r_star", "certificate infeasible: r_star = 0");

  c.big_radius = c.R_star + std::sqrt(2.0 * c.v_star_cap);
  const auto k = estimate_constants(sys, c.big_radius, opts.constant_samples, opts.seed);
  c.f_bar = k.f_bar;
  c.lipschitz_L_f = k.lipschitz_L_f;

  {
    double w_min = std::numeric_limits<double>::infinity();
    const auto dirs = sphere_directions(n, opts.sphere_directions, opts.seed + 3);
    for (double s : geometric(0.5 * c.r_star, c.big_radius, 1.01)) {
      for (const auto& d : dirs) w_min = std::min(w_min, clf.decay_rate(s * d));
    }
    c.w_bar = w_min / kSafetyInflation;
  }
  if (!(c.w_bar > 0.0)) {
    throw InfeasibleCertificate("w_bar", "certificate infeasible: decay rate vanishes on the annulus");
  }

  const auto distances = geometric(1e-15 * c.big_radius, 2.0 * c.big_radius, opts.distance_ratio);
  c.omega_V_table = modulus_of_continuity(clf, n, c.big_radius, distances, opts.modulus_pairs, opts.seed + 4);
  const ModulusTable& omega = c.omega_V_table;

  c.eps1 = std::min({chain.take("eps1", "2 L_f eps1 <= w_bar/20", c.w_bar / (40.0 * c.lipschitz_L_f)),
                     chain.take("eps1", "eps1 <= v_star/8 (terminal case)", c.v_star / 8.0),
                     chain.take("eps1", "v_bar + eps1 <= theta (overshoot)", c.theta - c.v_bar)});
  positive_or_throw(c.terms, "eps1", c.eps1);
  c.eps2 = chain.take("eps2", "eps2 <= v_star/8", c.v_star / 8.0);

  const double root_cap = std::sqrt(2.0 * c.v_star_cap);
  c.alpha_max = std::min({chain.take("alpha", "sqrt(2 V*) alpha <= 1", 1.0 / root_cap),
                          chain.take("alpha", "sqrt(2 V*) alpha <= r_star/2", 0.5 * c.r_star / root_cap),
                          chain.take("alpha", "sqrt(2 V*) alpha <= omega(eps1)", omega.inverse(c.eps1) / root_cap),
                          chain.take("alpha", "sqrt(2 v_bar) alpha <= omega(eps1/2)",
                                     omega.inverse(0.5 * c.eps1) / std::sqrt(2.0 * c.v_bar)),
                          chain.take("alpha", "alpha < 1", std::nextafter(1.0, 0.0))});
  positive_or_throw(c.terms, "alpha", c.alpha_max);
  const double a = c.alpha_max;

  c.delta_max = std::min({chain.take("delta", "delta < 1", std::nextafter(1.0, 0.0)),
                          chain.take("delta", "delta f_bar^2/(2 alpha^2) <= w_bar/20",
                                     c.w_bar * a * a / (10.0 * c.f_bar * c.f_bar)),
                          chain.take("delta", "delta w_bar/2 <= v_star/4", c.v_star / (2.0 * c.w_bar)),
                          chain.take("delta", "sqrt(2 V*)/alpha L_f f_bar delta <= w_bar/20",
                                     c.w_bar * a / (20.0 * root_cap * c.lipschitz_L_f * c.f_bar)),
                          chain.take("delta", "delta f_bar <= omega(eps2)", omega.inverse(c.eps2) / c.f_bar)});
  positive_or_throw(c.terms, "delta", c.delta_max);

  {
    std::vector<Vector> directions;
    const auto anchors = ball_samples(n, c.R_star, opts.probe_directions, opts.seed + 5);
    for (const auto& y : anchors) {
      for (const auto& u : box_vertices(sys.input_box)) {
        const Vector f = sys(y, u);
        if (f.norm() > 0.0) directions.push_back(f);
      }
    }
    ProbeOptions po;
    po.mu0 = 0.1;
    po.mu_min = opts.probe_mu_min;
    po.sample_count = opts.probe_points;
    po.seed = opts.seed + 6;
    po.method = clf.has_gradient_enclosure() ? ProbeMethod::kEnclosure : ProbeMethod::kQuotient;
    const auto probe = probe_uniformity(clf, Ball{Vector::Zero(n), c.R_star}, directions, c.w_bar / 5.0, po);
    // Flagged samples sit on the CLF's singular set, which is excluded.
    c.mu = probe.mu_unflagged;
    c.mu_flagged = probe.flagged_samples;
    c.mu_samples = probe.total_samples;
  }

  const double d = c.delta_max;
  c.eps_bound = std::min({chain.take("eps", "eps^2 <= delta w_bar/20", std::sqrt(d * c.w_bar / 20.0)),
                          chain.take("eps", "2 L_f eps^2 <= w_bar/20", std::sqrt(c.w_bar / (40.0 * c.lipschitz_L_f))),
                          chain.take("eps", "eps <= w_bar alpha^2/(10 (f_bar^2 + 2 alpha^2))",
                                     c.w_bar * a * a / (10.0 * (c.f_bar * c.f_bar + 2.0 * a * a))),
                          chain.take("eps", "eps^2 <= mu", std::sqrt(c.mu))});
  positive_or_throw(c.terms, "eps", c.eps_bound);
  c.eta_bound = chain.take("eta", "eta <= w_bar/20", c.w_bar / 20.0);
  c.reaching_time = 4.0 * (c.v_bar - 0.5 * c.v_star) / c.w_bar;

  if (!(c.r_star <= r)) throw std::logic_error("build_certificate: r_star exceeds r");
  return c;
}

bool check_eq26(const ControlDecision& decision, const MarginCertificate& cert) {
  return decision.objective_lower_bound <= -0.75 * cert.w_bar;
}

std::string serialize(const MarginCertificate& c) {
  std::ostringstream out;
  auto put = [&](const char* name, double v) { out << fmt::format("{} = {:.17g}\n", name, v); };
  out << "system = " << c.system_name << "\n";
  out << "clf = " << c.clf_name << "\n";
  put("R", c.R);
  put("r", c.r);
  put("R_star", c.R_star);
  put("v_bar", c.v_bar);
  put("v_star_cap", c.v_star_cap);
  put("theta", c.theta);
  put("v_star", c.v_star);
  put("r_star", c.r_star);
  put("big_radius", c.big_radius);
  put("f_bar", c.f_bar);
  put("lipschitz_L_f", c.lipschitz_L_f);
  put("w_bar", c.w_bar);
  put("mu", c.mu);
  out << "mu_flagged = " << c.mu_flagged << "\n";
  out << "mu_samples = " << c.mu_samples << "\n";
  put("eps1", c.eps1);
  put("eps2", c.eps2);
  put("alpha_max", c.alpha_max);
  put("delta_max", c.delta_max);
  put("eps_bound", c.eps_bound);
  put("eta_bound", c.eta_bound);
  put("reaching_time", c.reaching_time);
  return out.str();
}

std::string report(const MarginCertificate& c) {
  std::ostringstream out;
  out << fmt::format("Margin certificate for {} / {} with R = {:g}, r = {:g}\n\n", c.system_name, c.clf_name,
                     c.R, c.r);
  out << fmt::format("  R_star = {:.6g}  theta = {:.6g}  v_bar = {:.6g}  V* = {:.6g}\n", c.R_star, c.theta,
                     c.v_bar, c.v_star_cap);
  out << fmt::format("  v_star = {:.6g}  r_star = {:.6g}  w_bar = {:.6g}\n", c.v_star, c.r_star, c.w_bar);
  out << fmt::format("  f_bar = {:.6g}  L_f = {:.6g}  on B({:.6g})\n", c.f_bar, c.lipschitz_L_f, c.big_radius);
  out << fmt::format("  mu = {:.6g} ({} of {} probe samples flagged and excluded)\n\n", c.mu, c.mu_flagged,
                     c.mu_samples);
  std::string current;
  double bound_value = 0.0;
  for (const auto& t : c.terms) {
    if (t.bound != current) {
      current = t.bound;
      bound_value = std::numeric_limits<double>::infinity();
      for (const auto& u : c.terms) {
        if (u.bound == current) bound_value = std::min(bound_value, u.value);
      }
      out << fmt::format("{} = {:.6g}\n", current, bound_value);
    }
    out << fmt::format("  {} {:<52} {:.6g}\n", t.value == bound_value ? "*" : " ", t.name, t.value);
  }
  out << fmt::format("\nreaching time bound T = {:.6g}\n", c.reaching_time);
  return out.str();
}

}  // namespace shstab
