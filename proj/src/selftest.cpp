#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "shstab/experiment.hpp"
#include "shstab/sampling.hpp"

namespace shstab {
namespace {

struct Check {
  std::string name;
  std::function<bool()> body;
};

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

std::vector<Check> checks() {
  return {
      {"quadratic envelope matches |x|^2/(1+2 alpha^2)",
       [] {
         const Clf clf = quadratic_clf();
         for (const auto& p : ball_samples(3, 2.0, 20, 7)) {
           for (double a : {0.05, 0.1, 0.5}) {
             const double vb = std::max(clf(p), 1e-12);
             const auto r = envelope(clf, p, a, 1e-9, vb, objective_lipschitz(clf, p, a, vb, 1.0));
             const double exact = p.squaredNorm() / (1.0 + 2.0 * a * a);
             if (!(r.lower_bound <= exact + 1e-12 && exact <= r.upper_value + 1e-12)) return false;
           }
         }
         return true;
       }},
      {"envelope minimizers stay in the localization ball",
       [] {
         const Clf clf = nonholonomic_clf();
         for (const auto& p : ball_samples(3, 2.0, 20, 11)) {
           const double vb = std::max(clf(p), 1e-12);
           const auto r = envelope(clf, p, 0.1, 1e-8, vb, objective_lipschitz(clf, p, 0.1, vb, 1.0));
           if (!verify_lemma1(r, vb)) return false;
         }
         return true;
       }},
      {"nonholonomic control picks the vertex of the affine objective",
       [] {
         const auto sys = nonholonomic_integrator();
         EnvelopeResult env;
         env.minimizer = vec({0.0, 0.0, 0.0});
         env.subgradient = vec({1.0, 0.0, 0.0});
         FeedbackConfig cfg;
         const auto d = select_control(sys, env, cfg);
         return d.input[0] == -1.0 && d.objective_value == -1.0 && d.eta_achieved == 0.0;
       }},
      {"constant input is integrated exactly",
       [] {
         const auto sys = single_integrator();
         const Clf clf = quadratic_clf();
         SimOptions so;
         so.delta = 0.1;
         so.horizon = 0.5;
         so.substeps = 10;
         const auto run = simulate(
             sys, clf, [](const Vector&) { ControlDecision d; d.input = vec({-1.0}); return d; }, vec({1.0}), so);
         for (std::size_t k = 0; k < run.samples.size(); ++k) {
           if (std::abs(run.samples[k].x[0] - (1.0 - 0.1 * k)) > 1e-12) return false;
         }
         return run.samples.size() == 6;
       }},
      {"rk4 error falls by about 16 per halving",
       [] {
         const TimeVaryingField rhs = [](double t, const Vector&) { return vec({std::cos(t)}); };
         double prev = std::abs(integrate_rk4(rhs, 0.0, vec({0.0}), 2.0, 4)[0] - std::sin(2.0));
         for (int steps = 8; steps <= 32; steps *= 2) {
           const double e = std::abs(integrate_rk4(rhs, 0.0, vec({0.0}), 2.0, steps)[0] - std::sin(2.0));
           if (!(prev / e >= 12.0 && prev / e <= 20.0)) return false;
           prev = e;
         }
         return true;
       }},
      {"scalar certificate reproduces v* = 0.01 and r* = 0.05",
       [] {
         CertificateOptions o;
         o.sphere_directions = 2;
         const auto c = build_certificate(single_integrator(), quadratic_clf(1.0), 1.0, 0.1, o);
         return std::abs(c.v_star - 0.01) <= 1e-3 && std::abs(c.r_star - 0.05) <= 1e-3 && c.r_star <= c.r;
       }},
  };
}

}  // namespace

int selftest_command(std::ostream& out) {
  int failures = 0;
  for (const auto& c : checks()) {
    bool ok = false;
    try {
      ok = c.body();
    } catch (const std::exception& e) {
      out << fmt::format("  error: {}\n", e.what());
    }
    out << fmt::format("{} {}\n", ok ? "PASS" : "FAIL", c.name);
    if (!ok) ++failures;
  }
  out << fmt::format("{} of {} checks passed\n", static_cast<int>(checks().size()) - failures, checks().size());
  return failures == 0 ? kExitOk : kExitFailure;
}

}  // namespace shstab
