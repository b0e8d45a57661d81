#include "shstab/feedback.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "shstab/margins.hpp"
#include "shstab/sampling.hpp"

namespace shstab {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

EnvelopeResult fake_envelope(const Vector& y, const Vector& zeta) {
  EnvelopeResult env;
  env.minimizer = y;
  env.query_point = y;
  env.subgradient = zeta;
  env.alpha = 0.1;
  return env;
}

// f(x, u) = u^2 on a scalar state: not affine in u.
ControlSystem squared_input() {
  ControlSystem sys;
  sys.name = "squared-input";
  sys.state_dim = 1;
  sys.input_box = Box(vec({-1}), vec({1}));
  sys.vector_field = [](const Vector&, const Vector& u) { return Vector(u.cwiseProduct(u)); };
  return sys;
}

double sign(double v) { return v > 0 ? 1.0 : -1.0; }

TEST(SelectControl, NonholonomicVertexFormula) {
  const auto sys = nonholonomic_integrator();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  FeedbackConfig cfg;
  for (int i = 0; i < 200; ++i) {
    const Vector y = vec({c(rng), c(rng), c(rng)});
    const Vector z = vec({c(rng), c(rng), c(rng)});
    const double a = z[0] - z[2] * y[1];
    const double b = z[1] + z[2] * y[0];
    const auto d = select_control(sys, fake_envelope(y, z), cfg);
    ASSERT_EQ(d.input, vec({-sign(a), -sign(b)}));
    ASSERT_NEAR(d.objective_value, -std::abs(a) - std::abs(b), 1e-14);
    ASSERT_LE(d.eta_achieved, 1e-15);
  }
}

TEST(SelectControl, ZeroSubgradientTieBreak) {
  FeedbackConfig cfg;
  const auto d = select_control(nonholonomic_integrator(), fake_envelope(vec({0.3, 0.1, 0}), vec({0, 0, 0})), cfg);
  EXPECT_EQ(d.input, vec({-1, -1}));
  EXPECT_EQ(d.objective_value, 0.0);
  EXPECT_EQ(d.eta_achieved, 0.0);
}

TEST(SelectControl, FirstAxisSubgradient) {
  FeedbackConfig cfg;
  const auto d = select_control(nonholonomic_integrator(), fake_envelope(vec({0, 0, 0}), vec({1, 0, 0})), cfg);
  EXPECT_EQ(d.input[0], -1.0);
  EXPECT_EQ(d.input[1], -1.0);
  EXPECT_EQ(d.objective_value, -1.0);
  EXPECT_EQ(d.objective_lower_bound, -1.0);
}

TEST(SelectControl, ScaleCovariance) {
  const auto sys = nonholonomic_integrator();
  FeedbackConfig cfg;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Vector y = vec({c(rng), c(rng), c(rng)});
    const Vector z = vec({c(rng), c(rng), c(rng)});
    const auto one = select_control(sys, fake_envelope(y, z), cfg);
    const auto two = select_control(sys, fake_envelope(y, (2.0 * z).eval()), cfg);
    ASSERT_EQ(one.input, two.input);
    ASSERT_NEAR(two.objective_value, 2.0 * one.objective_value, 1e-14);
    ASSERT_NEAR(two.objective_lower_bound, 2.0 * one.objective_lower_bound, 1e-14);
  }
}

TEST(SelectControl, InjectionStaysWithinEta) {
  const auto sys = nonholonomic_integrator();
  FeedbackConfig cfg;
  cfg.inject_inaccuracy = true;
  cfg.eta_x = 0.25;
  // Objective 0.5 u1 + 1.0 u2: grid values step by 0.1 in u1 and 0.2 in u2.
  const auto d = select_control(sys, fake_envelope(vec({0, 0, 0}), vec({0.5, 1.0, 0})), cfg);
  EXPECT_EQ(d.objective_lower_bound, -1.5);
  EXPECT_NEAR(d.objective_value, -1.3, 1e-12);
  EXPECT_LE(d.eta_achieved, cfg.eta_x);
  EXPECT_NEAR(d.eta_achieved, 0.2, 1e-12);
}

TEST(SelectControl, NonAffineRefinesUntilEta) {
  const auto sys = squared_input();
  EXPECT_FALSE(is_control_affine(sys, vec({0})));
  EXPECT_TRUE(is_control_affine(nonholonomic_integrator(), vec({1, 2, 3})));
  FeedbackConfig cfg;
  cfg.eta_x = 0.05;
  const auto d = select_control(sys, fake_envelope(vec({0}), vec({1})), cfg);
  EXPECT_EQ(d.input, vec({0}));
  EXPECT_EQ(d.objective_value, 0.0);
  EXPECT_LE(d.objective_lower_bound, 0.0);
  EXPECT_LE(d.eta_achieved, 0.05);
}

TEST(SelectControl, NonAffineBudgetErrorReportsBest) {
  FeedbackConfig cfg;
  cfg.eta_x = 1e-8;
  try {
    select_control(squared_input(), fake_envelope(vec({0}), vec({1})), cfg);
    FAIL() << "expected a selection failure";
  } catch (const FeedbackError& e) {
    EXPECT_EQ(e.stage(), FeedbackStage::kSelection);
    EXPECT_GT(e.best().eta_achieved, cfg.eta_x);
    EXPECT_EQ(e.best().input, vec({0}));
  }
}

TEST(FeedbackConfig, Validation) {
  FeedbackConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.eta_x = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.input_grid_res = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(InfcFeedback, NearOriginUsesTieBreak) {
  FeedbackConfig cfg;
  const auto d = infc_feedback(nonholonomic_integrator(), nonholonomic_clf(), vec({1e-13, 0, 0}), cfg);
  EXPECT_EQ(d.input, vec({-1, -1}));
  EXPECT_LE(d.envelope.subgradient.norm(), 1e-10);
}

TEST(InfcFeedback, ReferenceStateMeetsCertifiedDecay) {
  const auto sys = nonholonomic_integrator();
  const auto clf = nonholonomic_clf();
  const auto cert = build_certificate(sys, clf, 2.0, 0.1);
  FeedbackConfig cfg;
  cfg.eps_x = 1e-4;
  cfg.eta_x = 1e-8;
  const auto d = infc_feedback(sys, clf, vec({1, 0.5, -0.1}), cfg);
  EXPECT_LE(d.envelope.epsilon_achieved, 1e-8);
  EXPECT_TRUE(check_eq26(d, cert));
}

TEST(InfcFeedback, LooseAccuracyCompletes) {
  FeedbackConfig cfg;
  cfg.eps_x = 10.0;
  const auto d = infc_feedback(nonholonomic_integrator(), nonholonomic_clf(), vec({1, 0.5, -0.1}), cfg);
  EXPECT_LE(d.envelope.epsilon_achieved, 100.0);
  EXPECT_GE(d.eta_achieved, 0.0);
  EXPECT_EQ(d.input.size(), 2);
}

TEST(InfcFeedback, Deterministic) {
  FeedbackConfig cfg;
  const auto a = infc_feedback(nonholonomic_integrator(), nonholonomic_clf(), vec({-0.4, 0.8, 0.6}), cfg);
  const auto b = infc_feedback(nonholonomic_integrator(), nonholonomic_clf(), vec({-0.4, 0.8, 0.6}), cfg);
  EXPECT_EQ(a.input, b.input);
  EXPECT_EQ(a.objective_value, b.objective_value);
  EXPECT_EQ(a.envelope.minimizer, b.envelope.minimizer);
}

TEST(InfcFeedback, EnvelopeBudgetFailureIsTagged) {
  FeedbackConfig cfg;
  cfg.eps_x = 1e-7;
  cfg.envelope.max_evaluations = 600;
  try {
    infc_feedback(nonholonomic_integrator(), nonholonomic_clf(), vec({1, 0.5, -0.1}), cfg);
    FAIL() << "expected an envelope failure";
  } catch (const FeedbackError& e) {
    EXPECT_EQ(e.stage(), FeedbackStage::kEnvelope);
    EXPECT_EQ(e.best().input.size(), 2);
  }
}

TEST(InfcFeedback, SubgradientBoundedByDiniAlongChosenVelocity) {
  // <zeta, f(y,u)> <= D V(y; f(y,u)) + (eps / (2 alpha^2)) f_bar^2 + eps, with
  // the nonnegative w_bar / 5 term dropped.
  const auto sys = nonholonomic_integrator();
  const auto clf = nonholonomic_clf();
  FeedbackConfig cfg;
  cfg.eps_x = 1e-4;
  const double eps = cfg.eps_x;
  const double f_bar = oracle::nonholonomic_speed_sup(2.5);
  for (const auto& x : ball_samples(3, 2.0, 40, 19)) {
    const auto d = infc_feedback(sys, clf, x, cfg);
    const Vector y = d.envelope.minimizer;
    const Vector v = sys(y, d.input);
    const double dini = dini_derivative(clf, y, v, 1e-9).value;
    const double bound = dini + eps / (2.0 * cfg.alpha * cfg.alpha) * f_bar * f_bar + eps;
    ASSERT_LE(d.objective_value, bound) << "at " << x.transpose();
  }
}

}  // namespace
}  // namespace shstab
