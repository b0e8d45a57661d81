#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>

#include "shstab/clf.hpp"
#include "shstab/types.hpp"

namespace shstab {

/// Tuning of the certified inf-convolution solver.
struct EnvelopeOptions {
  int grid_cells_per_axis = 8;  // coarse uniform pass over the localization cube
  int refine_starts = 5;        // pattern searches launched from the best cells
  std::size_t max_evaluations = 4'000'000;
};

/// Certified output of the inf-convolution V_alpha(x) = inf_y V(y) + |y-x|^2/(2 alpha^2).
struct EnvelopeResult {
  Vector query_point;
  Vector minimizer;             // y with objective <= V_alpha(x) + epsilon_achieved
  double upper_value = 0.0;     // objective at `minimizer`
  double lower_bound = 0.0;     // certified lower bound on V_alpha(x)
  double epsilon_achieved = 0.0;
  double alpha = 0.0;
  double v_bar = 0.0;           // sizes the localization ball
  Vector subgradient;           // (x - y) / alpha^2
  std::size_t evaluations = 0;

  /// Radius sqrt(2 v_bar) alpha of the ball that contains every near-minimizer.
  double localization_radius() const;
};

/// Thrown when the certified gap cannot reach the target within the
/// evaluation budget. Carries the best certified result found so far.
class EnvelopeBudgetError : public std::runtime_error {
 public:
  EnvelopeBudgetError(const std::string& what, EnvelopeResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const EnvelopeResult& best() const { return best_; }

 private:
  EnvelopeResult best_;
};

/// y -> V(y) + |y - x|^2 / (2 alpha^2).
double envelope_objective(const Clf& clf, const Vector& x, const Vector& y, double alpha);

/// Computes an eps_target-minimizer of the inf-convolution with a certified
/// gap. The search is restricted to the ball B(x, sqrt(2 v_bar) alpha), which
/// holds every near-minimizer whenever v_bar >= V(x). A coarse grid pass and
/// compass pattern searches from the best cells produce the incumbent; the
/// grid cells are then refined branch-and-bound style until
/// upper - lower <= eps_target. Cell lower bounds combine
///   - the Lipschitz bound  g(c) - obj_lipschitz * half_diagonal,
///   - the exact minimum of the quadratic term (V >= 0),
///   - a mean-value bound from the CLF's gradient enclosure, when present.
/// Ties between equal grid minima go to the lowest lexicographic index.
///
/// Requires 0 < alpha < 1, eps_target > 0, v_bar >= V(x), obj_lipschitz > 0.
EnvelopeResult envelope(const Clf& clf, const Vector& x, double alpha,
                        double eps_target, double v_bar, double obj_lipschitz,
                        const EnvelopeOptions& opts = {});

/// Objective Lipschitz constant on the localization ball: the CLF's constant
/// plus the gradient bound sqrt(2 v_bar) / alpha of the quadratic term.
double envelope_lipschitz(double clf_lipschitz, double v_bar, double alpha);

/// Objective Lipschitz constant for a query at x. Uses the CLF's gradient
/// enclosure over the localization cube when available and falls back to
/// `clf_lipschitz` otherwise.
double objective_lipschitz(const Clf& clf, const Vector& x, double alpha, double v_bar,
                           double clf_lipschitz);

/// |y - x| <= sqrt(2 v_bar) alpha.
bool verify_lemma1(const EnvelopeResult& result, double v_bar);

/// Largest alpha in (0, 1) obeying sqrt(2 v_bar) alpha <= omega(eps1 / 2),
/// where omega maps an accuracy to the largest admissible displacement.
double lemma2_alpha(double v_bar, double eps1, const std::function<double(double)>& omega);

/// Solves the envelope at x with internal accuracy eps1 / 4 and checks the
/// sandwich V_alpha(x) <= V(x) <= V_alpha(x) + eps1 on the certified
/// bracket: upper <= V(x) and V(x) <= lower + eps1.
bool verify_lemma2(const Clf& clf, const Vector& x, double alpha, double eps1,
                   double v_bar, double obj_lipschitz,
                   const EnvelopeOptions& opts = {});

struct InequalityCheck {
  bool holds = false;
  double slack = 0.0;  // right-hand side minus left-hand side
};

/// Approximate second-order expansion of the envelope:
///   V_alpha(x + h theta) <= V_alpha(x) + h <zeta, theta> + h^2 |theta|^2 / (2 alpha^2) + eps,
/// with eps the certified gap of `result`. The left side is bounded above by
/// a fresh certified envelope at x + h theta (and by the objective at the old
/// minimizer); the right side uses the certified lower bound of V_alpha(x).
InequalityCheck check_taylor(const EnvelopeResult& result, const Clf& clf, double h,
                             const Vector& theta, double obj_lipschitz,
                             const EnvelopeOptions& opts = {});

/// Proximal eps-subgradient inequality at the minimizer y:
///   V(z) >= V(y) + <zeta, z - y> - |z - y|^2 / (2 alpha^2) - eps.
InequalityCheck check_eps_subgradient(const EnvelopeResult& result, const Clf& clf,
                                      const Vector& z);

}  // namespace shstab
