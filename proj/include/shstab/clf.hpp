#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shstab/systems.hpp"
#include "shstab/types.hpp"

namespace shstab {

/// Encloses the Clarke generalized gradient of V over a box, one interval per
/// coordinate. By Lebourg's mean value theorem every difference quotient of V
/// between two points of the box lies in the inner product of this enclosure
/// with the displacement.
using GradientEnclosure = std::function<IntervalVector(const Box&)>;

/// A control Lyapunov function V together with its decay rate w.
struct Clf {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<double(const Vector&)> decay_rate;
  /// Optional. Enables second-order certified bounds in the envelope solver
  /// and the enclosure-based uniformity probe.
  GradientEnclosure gradient_enclosure;

  double operator()(const Vector& x) const { return value(x); }
  bool has_gradient_enclosure() const { return static_cast<bool>(gradient_enclosure); }
};

/// V(x) = x1^2 + x2^2 + 2 x3^2 - 2|x3| sqrt(x1^2 + x2^2), w(x) = c |x|^2.
Clf nonholonomic_clf(double decay_coefficient = 0.01);

/// V(x) = |x|^2, w(x) = c |x|^2, in any dimension.
Clf quadratic_clf(double decay_coefficient = 1.0);

/// Registry lookup: "nonholonomic" or "quadratic".
Clf make_clf(const std::string& name, double decay_coefficient);

/// Geometric ladder mu0, mu0/2, ... of difference-quotient step sizes.
struct DiniOptions {
  double mu0 = 0.1;
};

struct DiniEstimate {
  double value = 0.0;
  double mu_used = 0.0;
  std::vector<std::pair<double, double>> quotient_trace;  // (mu', quotient)
};

/// Lower directional Dini derivative of V at x along theta, estimated as the
/// minimum of the last three rungs of the quotient ladder that ends at the
/// smallest rung >= mu_min.
DiniEstimate dini_derivative(const Clf& clf, const Vector& x, const Vector& theta,
                             double mu_min, const DiniOptions& opts = {});

struct DecayCheck {
  bool satisfied = false;
  double margin = 0.0;  // -(min Dini) - w(x)
  Vector best_input;
};

/// Checks min over the input grid of D_{f(x,u)} V(x) <= -w(x). A grid
/// minimum over-approximates the infimum over the convexified velocity set,
/// so `satisfied` is a sufficient verdict only.
DecayCheck check_decay(const Clf& clf, const ControlSystem& sys, const Vector& x,
                       int input_grid_res, double mu_min,
                       const DiniOptions& opts = {});

enum class ProbeMethod {
  /// Compares sampled difference quotients against the ladder Dini estimate.
  kQuotient,
  /// Bounds every quotient along [y, y + mu theta] with the gradient
  /// enclosure; immune to cancellation, requires Clf::gradient_enclosure.
  kEnclosure,
};

struct ProbeOptions {
  double mu0 = 0.1;
  double mu_min = 1e-9;
  std::size_t sample_count = 200;
  std::uint64_t seed = 1;
  ProbeMethod method = ProbeMethod::kQuotient;
};

struct ProbeResult {
  double mu = 0.0;  // 0 flags a numerical violation of uniformity
  Vector worst_point;
  Vector worst_direction;
  double mu_unflagged = 0.0;  // min over samples that did not flag
  std::size_t flagged_samples = 0;  // samples where no rung satisfied the bound
  std::size_t total_samples = 0;
};

/// Searches sampled y in `region` (the centre is always sampled) and theta in
/// `directions` for the largest ladder rung mu such that every quotient with
/// mu' <= mu stays within nu of the Dini derivative. This is a falsification
/// probe, not a proof.
ProbeResult probe_uniformity(const Clf& clf, const Ball& region,
                             std::span<const Vector> directions, double nu,
                             const ProbeOptions& opts = {});

/// Per-point version of the probe; returns 0 if no rung satisfies the bound.
double uniformity_mu_at(const Clf& clf, const Vector& y, const Vector& theta,
                        double nu, const ProbeOptions& opts);

}  // namespace shstab
