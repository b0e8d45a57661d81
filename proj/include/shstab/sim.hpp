#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shstab/clf.hpp"
#include "shstab/feedback.hpp"
#include "shstab/systems.hpp"

namespace shstab {

struct MarginCertificate;

/// Right-hand side x' = g(t, x).
using TimeVaryingField = std::function<Vector(double t, const Vector& x)>;

/// Classical four-stage Runge-Kutta with `steps` equal steps from t0 to t1.
/// `observer`, if set, is called after every step.
Vector integrate_rk4(const TimeVaryingField& rhs, double t0, const Vector& x0, double t1,
                     int steps,
                     const std::function<void(double, const Vector&)>& observer = {});

struct SampleRecord {
  double t = 0.0;
  Vector x;
  Vector u;
  double V = 0.0;
  double V_alpha_lo = 0.0;
  double V_alpha_hi = 0.0;
  double eps_achieved = 0.0;
  double eta_achieved = 0.0;
  double objective_value = 0.0;
  double objective_lower_bound = 0.0;
  bool budget_failure = false;
};

struct DenseState {
  double t = 0.0;
  Vector x;
  Vector u;  // input held over the step that ended here
};

enum class EventKind { kEnteredTarget, kLeftTarget, kBudgetFailure };

struct SimEvent {
  double t = 0.0;
  EventKind kind = EventKind::kBudgetFailure;
  std::string detail;
};

const char* to_string(EventKind kind);

struct SampleHoldRun {
  double delta = 0.0;
  int substeps = 0;
  std::vector<SampleRecord> samples;
  std::vector<DenseState> dense_states;  // empty unless requested
  std::vector<SimEvent> events;
};

struct SimOptions {
  double delta = 0.005;
  double horizon = 10.0;
  int substeps = 10;
  bool dense = false;
  double target_radius = 0.0;  // entry/exit events are logged when positive

  void validate() const;
};

/// Per-sample feedback. FeedbackError is recorded as a budget-failure event
/// and its best-effort decision is held.
using SampleFeedback = std::function<ControlDecision(const Vector& x)>;

/// Sample-and-hold closed loop: the decision at x_k is held over
/// [k delta, (k+1) delta] and the flow is integrated with RK4. Samples are
/// recorded at t_k = k delta for k = 0..round(horizon / delta); the decision
/// at the last sample is recorded but not applied.
SampleHoldRun simulate(const ControlSystem& sys, const Clf& clf, const SampleFeedback& feedback,
                       const Vector& x0, const SimOptions& opts);

/// Closed loop under the InfC-feedback.
SampleHoldRun simulate(const ControlSystem& sys, const Clf& clf, const FeedbackConfig& cfg,
                       const Vector& x0, const SimOptions& opts);

struct StabilityVerdict {
  double start_radius_R = 0.0;
  double target_radius_r = 0.0;
  bool bounded = true;
  std::optional<double> exit_time;  // first time outside B_{R_star}
  std::optional<double> entered_at;
  bool stayed = false;
  double reaching_time_bound = 0.0;
};

/// Scans dense states (samples if none were recorded) for boundedness in
/// B_{R_star}, first entry into B_r and permanence after entry.
/// Throws std::invalid_argument unless 0 < r < R <= R_star.
StabilityVerdict verdict(const SampleHoldRun& run, double R, double r, double R_star,
                         double reaching_time_bound = 0.0);

struct DecayRecord {
  std::size_t k = 0;
  bool decayed = false;
  double amount = 0.0;  // upper V_alpha(x_{k+1}) - lower V_alpha(x_k)
};

/// For every k whose certified V_alpha(x_k) is at least v*/2, checks
/// V_alpha(x_{k+1}) - V_alpha(x_k) <= -delta w_bar / 2 on the certified
/// brackets. Samples below the threshold are skipped.
std::vector<DecayRecord> samplewise_decay_check(const SampleHoldRun& run,
                                                const MarginCertificate& cert);

/// Same scan with the plain strict-decrease test upper(k+1) < lower(k).
std::vector<DecayRecord> samplewise_strict_decrease(const SampleHoldRun& run, double threshold);

}  // namespace shstab
