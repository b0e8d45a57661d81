#pragma once

#include <stdexcept>
#include <string>

#include "shstab/clf.hpp"
#include "shstab/infconv.hpp"
#include "shstab/systems.hpp"

namespace shstab {

/// Per-sample accuracy budgets and parameters of the InfC-feedback.
struct FeedbackConfig {
  double alpha = 0.1;
  double eps_x = 1e-4;        // the envelope is solved to a gap of eps_x^2
  double eta_x = 1e-8;        // admissible suboptimality of the held input
  int input_grid_res = 11;    // per-axis nodes of the input grid
  double v_bar = 1.0;         // sizes the localization ball (raised to V(x) if smaller)
  double clf_lipschitz = 1.0; // only used when the CLF has no gradient enclosure
  /// Deliberately hold an input whose objective sits up to eta_x above the
  /// certified infimum: the grid point with the largest value in
  /// [inf, inf + eta_x].
  bool inject_inaccuracy = false;
  EnvelopeOptions envelope;

  /// Throws std::invalid_argument unless every budget is positive and alpha < 1.
  void validate() const;
};

struct ControlDecision {
  Vector input;
  EnvelopeResult envelope;
  double objective_value = 0.0;        // <zeta, f(y, u)> at the held input
  double objective_lower_bound = 0.0;  // certified inf over the input box
  double eta_achieved = 0.0;
};

enum class FeedbackStage { kEnvelope, kSelection };

/// A budget failure in one stage of the feedback. Carries a usable
/// best-effort decision.
class FeedbackError : public std::runtime_error {
 public:
  FeedbackError(const std::string& what, FeedbackStage stage, ControlDecision best)
      : std::runtime_error(what), stage_(stage), best_(std::move(best)) {}
  FeedbackStage stage() const { return stage_; }
  const ControlDecision& best() const { return best_; }

 private:
  FeedbackStage stage_;
  ControlDecision best_;
};

/// True if u -> f(x, u) is affine on the input box, probed at the centre,
/// the face midpoints and the vertices to a relative tolerance of 1e-12.
bool is_control_affine(const ControlSystem& sys, const Vector& x);

/// Minimizes u -> <zeta, f(y, u)> over the input box. Control-affine systems
/// are solved exactly at the vertices; otherwise the grid is refined (up to
/// three doublings) until the Lipschitz-certified gap is within cfg.eta_x.
/// Ties go to the lexicographically smallest input.
/// Throws FeedbackError(kSelection) if the gap stays above cfg.eta_x.
ControlDecision select_control(const ControlSystem& sys, const EnvelopeResult& env,
                               const FeedbackConfig& cfg);

/// Envelope at x with gap target eps_x^2 followed by select_control.
/// Throws FeedbackError tagged with the failing stage.
ControlDecision infc_feedback(const ControlSystem& sys, const Clf& clf, const Vector& x,
                              const FeedbackConfig& cfg);

}  // namespace shstab
