#include "shstab/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "shstab/margins.hpp"

namespace shstab {

Vector integrate_rk4(const TimeVaryingField& rhs, double t0, const Vector& x0, double t1,
                     int steps, const std::function<void(double, const Vector&)>& observer) {
  if (steps < 1) throw std::invalid_argument("integrate_rk4: steps must be >= 1");
  const double h = (t1 - t0) / steps;
  Vector x = x0;
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    const Vector k1 = rhs(t, x);
    const Vector k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = rhs(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (observer) observer(t0 + (i + 1) * h, x);
  }
  return x;
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kEnteredTarget: return "entered_target";
    case EventKind::kLeftTarget: return "left_target";
    case EventKind::kBudgetFailure: return "budget_failure";
  }
  return "unknown";
}

void SimOptions::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("simulate: delta must be positive");
  if (!(horizon >= delta)) throw std::invalid_argument("simulate: horizon must be >= delta");
  if (substeps < 1) throw std::invalid_argument("simulate: substeps must be >= 1");
}

SampleHoldRun simulate(const ControlSystem& sys, const Clf& clf, const SampleFeedback& feedback,
                       const Vector& x0, const SimOptions& opts) {
  opts.validate();
  const auto steps = static_cast<long>(std::llround(opts.horizon / opts.delta));
  SampleHoldRun run;
  run.delta = opts.delta;
  run.substeps = opts.substeps;
  run.samples.reserve(steps + 1);

  bool inside = false;
  auto track = [&](double t, const Vector& x) {
    if (!(opts.target_radius > 0.0)) return;
    const bool now = x.norm() <= opts.target_radius;
    if (now != inside) {
      run.events.push_back({t, now ? EventKind::kEnteredTarget : EventKind::kLeftTarget, ""});
      inside = now;
    }
  };

  Vector x = x0;
  track(0.0, x);
  if (opts.dense) run.dense_states.push_back({0.0, x, Vector()});
  for (long k = 0; k <= steps; ++k) {
    const double t = k * opts.delta;
    SampleRecord rec;
    rec.t = t;
    rec.x = x;
    rec.V = clf(x);
    ControlDecision d;
    try {
      d = feedback(x);
    } catch (const FeedbackError& e) {
      d = e.best();
      rec.budget_failure = true;
      run.events.push_back({t, EventKind::kBudgetFailure, e.what()});
    }
    rec.u = d.input;
    if (d.envelope.minimizer.size() > 0) {
      rec.V_alpha_lo = d.envelope.lower_bound;
      rec.V_alpha_hi = d.envelope.upper_value;
      rec.eps_achieved = d.envelope.epsilon_achieved;
    } else {
      rec.V_alpha_lo = rec.V_alpha_hi = std::nan("");
    }
    rec.eta_achieved = d.eta_achieved;
    rec.objective_value = d.objective_value;
    rec.objective_lower_bound = d.objective_lower_bound;
    run.samples.push_back(rec);
    if (k == steps) break;

    const Vector u = d.input;
    const auto rhs = [&](double, const Vector& s) { return sys(s, u); };
    const double t1 = (k + 1) * opts.delta;
    x = integrate_rk4(rhs, t, x, t1, opts.substeps, [&](double ts, const Vector& xs) {
      if (opts.dense) run.dense_states.push_back({ts, xs, u});
      track(ts, xs);
    });
  }
  return run;
}

SampleHoldRun simulate(const ControlSystem& sys, const Clf& clf, const FeedbackConfig& cfg,
                       const Vector& x0, const SimOptions& opts) {
  cfg.validate();
  return simulate(sys, clf, [&](const Vector& x) { return infc_feedback(sys, clf, x, cfg); }, x0,
                  opts);
}

StabilityVerdict verdict(const SampleHoldRun& run, double R, double r, double R_star,
                         double reaching_time_bound) {
  if (!(r > 0.0 && r < R)) throw std::invalid_argument("verdict: need 0 < r < R");
  if (!(R <= R_star)) throw std::invalid_argument("verdict: need R <= R_star");
  StabilityVerdict v;
  v.start_radius_R = R;
  v.target_radius_r = r;
  v.reaching_time_bound = reaching_time_bound;

  std::vector<std::pair<double, double>> norms;
  if (!run.dense_states.empty()) {
    for (const auto& s : run.dense_states) norms.emplace_back(s.t, s.x.norm());
  } else {
    for (const auto& s : run.samples) norms.emplace_back(s.t, s.x.norm());
  }
  for (const auto& [t, n] : norms) {
    if (v.bounded && n > R_star) {
      v.bounded = false;
      v.exit_time = t;
    }
    if (!v.entered_at && n <= r) {
      v.entered_at = t;
      v.stayed = true;
    } else if (v.entered_at && n > r) {
      v.stayed = false;
    }
  }
  return v;
}

std::vector<DecayRecord> samplewise_decay_check(const SampleHoldRun& run,
                                                const MarginCertificate& cert) {
  std::vector<DecayRecord> out;
  const double required = -0.5 * run.delta * cert.w_bar;
  for (std::size_t k = 0; k + 1 < run.samples.size(); ++k) {
    const auto& now = run.samples[k];
    if (!(now.V_alpha_lo >= 0.5 * cert.v_star)) continue;
    const double amount = run.samples[k + 1].V_alpha_hi - now.V_alpha_lo;
    out.push_back({k, amount <= required, amount});
  }
  return out;
}

std::vector<DecayRecord> samplewise_strict_decrease(const SampleHoldRun& run, double threshold) {
  std::vector<DecayRecord> out;
  for (std::size_t k = 0; k + 1 < run.samples.size(); ++k) {
    const auto& now = run.samples[k];
    if (!(now.V_alpha_lo >= threshold)) continue;
    const double amount = run.samples[k + 1].V_alpha_hi - now.V_alpha_lo;
    out.push_back({k, amount < 0.0, amount});
  }
  return out;
}

}  // namespace shstab
