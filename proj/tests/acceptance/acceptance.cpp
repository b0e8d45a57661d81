// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "shstab/experiment.hpp"
#include "shstab/sampling.hpp"

#ifndef SHSTAB_CONFIG_DIR
#error "SHSTAB_CONFIG_DIR must point at the configs directory"
#endif
#ifndef SHSTAB_CLI_PATH
#error "SHSTAB_CLI_PATH must point at the command-line binary"
#endif

namespace {

using namespace shstab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

double envelope_v_bar(const Clf& clf, const Vector& x) { return std::max(clf(x), 1e-12); }

// Sup of V over B_radius, inflated, for sizing localization balls.
double ball_sup(const Clf& clf, int dim, double radius) {
  const std::vector<double> grid{radius};
  return kSafetyInflation * rho_lambda(clf, dim, grid, 4000, 1).ball_sup(radius);
}

Verdict quadratic_oracle() {
  const auto start = Clock::now();
  const Clf clf = quadratic_clf();
  int bad = 0;
  double worst_gap = 0.0;
  for (const auto& x : ball_samples(3, 2.0, 100, 101)) {
    for (double a : {0.05, 0.1, 0.5}) {
      const double vb = envelope_v_bar(clf, x);
      const auto r = envelope(clf, x, a, 1e-6, vb, objective_lipschitz(clf, x, a, vb, 1.0));
      const double exact = x.squaredNorm() / (1.0 + 2.0 * a * a);
      worst_gap = std::max(worst_gap, r.epsilon_achieved);
      const bool bracketed = r.lower_bound <= exact + 1e-12 && exact <= r.upper_value + 1e-12;
      if (!bracketed || std::abs(r.upper_value - exact) > r.epsilon_achieved + 1e-12 || r.epsilon_achieved > 1e-6) {
        ++bad;
      }
    }
  }
  const double t = seconds_since(start);
  return {bad == 0 && t < 10.0,
          fmt::format("{} of 300 cases outside the bracket, worst gap {:.3g}, {:.2f} s", bad, worst_gap, t)};
}

Verdict localization() {
  const Clf clf = nonholonomic_clf();
  const double search_bar = ball_sup(clf, 3, 2.0);
  const double alphas[] = {0.05, 0.1, 0.2, 0.5};
  const double epss[] = {1e-4, 1e-6, 1e-8};
  const auto pts = ball_samples(3, 2.0, 500, 202);
  int bad = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double a = alphas[i % 4];
    const double eps = epss[(i / 4) % 3];
    // Search the ball sized by the sup over B_2, then test the sharper radius
    // sqrt(2 (V(x) + eps)) alpha that the localization argument predicts.
    const auto r = envelope(clf, pts[i], a, eps, search_bar,
                            objective_lipschitz(clf, pts[i], a, search_bar, 1.0));
    const double v = clf(pts[i]) + r.epsilon_achieved;
    const double ratio = (r.minimizer - pts[i]).norm() / (std::sqrt(2.0 * v) * a);
    worst = std::max(worst, ratio);
    if (!verify_lemma1(r, v)) ++bad;
  }
  return {bad == 0, fmt::format("{} violations in 500 draws, largest |y-x| / radius = {:.4f}", bad, worst)};
}

Verdict sandwich() {
  const Clf clf = nonholonomic_clf();
  const double v_bar = ball_sup(clf, 3, 2.0);
  const auto distances = [] {
    std::vector<double> g;
    for (double d = 1e-12; d < 6.0; d *= 1.2) g.push_back(d);
    g.push_back(6.0);
    return g;
  }();
  const auto omega = modulus_of_continuity(clf, 3, 3.0, distances, 4000, 3);
  const auto omega_inverse = [&](double eps) { return omega.inverse(eps); };
  const double eps1s[] = {1e-1, 1e-2, 1e-3};
  const auto pts = ball_samples(3, 2.0, 500, 303);
  int bad = 0;
  double smallest_alpha = 1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double e1 = eps1s[i % 3];
    const double a = lemma2_alpha(v_bar, e1, omega_inverse);
    smallest_alpha = std::min(smallest_alpha, a);
    if (!(a > 0.0) ||
        !verify_lemma2(clf, pts[i], a, e1, v_bar, objective_lipschitz(clf, pts[i], a, v_bar, 1.0))) {
      ++bad;
    }
  }
  return {bad == 0, fmt::format("{} violations in 500 draws, smallest alpha {:.3g}", bad, smallest_alpha)};
}

Verdict taylor() {
  const double f_bar = estimate_constants(nonholonomic_integrator(), 2.5, 4000, 1).f_bar;
  int bad = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (const Clf& clf : {nonholonomic_clf(), quadratic_clf()}) {
    const auto pts = ball_samples(3, 2.0, 100, 404);
    const auto dirs = sphere_directions(3, 100, 405);
    const auto hs = halton_cube(2, 100, 406);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double h = 0.2 * hs[i][0] - 0.1;
      const Vector theta = hs[i][1] * f_bar * dirs[i];
      const double vb = envelope_v_bar(clf, pts[i]);
      const double lip = objective_lipschitz(clf, pts[i], 0.1, vb, 1.0);
      const auto r = envelope(clf, pts[i], 0.1, 1e-8, vb, lip);
      const auto check = check_taylor(r, clf, h, theta, lip);
      min_slack = std::min(min_slack, check.slack);
      if (!check.holds) ++bad;
    }
  }
  return {bad == 0, fmt::format("{} violations in 200 draws (f_bar = {:.4g}), smallest slack {:.3g}", bad, f_bar,
                                min_slack)};
}

struct SweepData {
  ExperimentConfig cfg;
  std::map<double, RunOutcome> runs;
  std::map<double, double> seconds;
};

SweepData sweep() {
  SweepData s;
  s.cfg = load_config(fs::path(SHSTAB_CONFIG_DIR) / "nonholonomic.ini");
  for (std::size_t i = 0; i < s.cfg.eta_sweep.size(); ++i) {
    const auto start = Clock::now();
    auto o = run_single(s.cfg, i);
    s.seconds[o.eta] = seconds_since(start);
    s.runs[o.eta] = std::move(o);
  }
  return s;
}

Verdict reproduction(const SweepData& s) {
  const auto& fine = s.runs.at(1e-8);
  const auto& mid = s.runs.at(1e-5);
  const auto& coarse = s.runs.at(1e-2);
  double slowest = 0.0;
  for (const auto& [eta, t] : s.seconds) slowest = std::max(slowest, t);
  const bool bounded = fine.verdict.bounded && s.cfg.bound_radius == 3.0;
  const double gap_low = mid.terminal_mean_norm / fine.terminal_mean_norm;
  const double gap_high = coarse.terminal_mean_norm / mid.terminal_mean_norm;
  const bool ordered = gap_low >= 2.0 && gap_high >= 2.0;
  return {bounded && ordered && slowest < 60.0,
          fmt::format("terminal mean |x|: {:.5g} (1e-8), {:.5g} (1e-5), {:.5g} (1e-2); gaps {:.3f}x and {:.3f}x; "
                      "bounded in B_3: {}; slowest run {:.2f} s",
                      fine.terminal_mean_norm, mid.terminal_mean_norm, coarse.terminal_mean_norm, gap_low, gap_high,
                      bounded ? "yes" : "no", slowest)};
}

Verdict samplewise_decay(const SweepData& s) {
  const auto& fine = s.runs.at(1e-8);
  const double share = fine.case1_samples > 0
                           ? static_cast<double>(fine.case1_decayed) / static_cast<double>(fine.case1_samples)
                           : 0.0;

  const auto& coarse = s.runs.at(1e-2);
  const Clf clf = make_clf(s.cfg.clf_name, s.cfg.decay_coefficient);
  const double threshold = case1_threshold(clf, 3, s.cfg.r, s.cfg.seed);
  std::optional<std::size_t> entry;
  for (std::size_t k = 0; k < coarse.run.samples.size() && !entry; ++k) {
    if (coarse.run.samples[k].x.norm() <= 2.0 * s.cfg.r) entry = k;
  }
  std::size_t late_failures = 0;
  for (const auto& d : samplewise_strict_decrease(coarse.run, threshold)) {
    if (entry && d.k >= *entry && !d.decayed) ++late_failures;
  }
  return {share >= 0.95 && late_failures > 0,
          fmt::format("eta 1e-8: {} of {} Case-1 samples decayed ({:.1f}%); eta 1e-2: {} failures after entering "
                      "B_2r{}",
                      fine.case1_decayed, fine.case1_samples, 100.0 * share, late_failures,
                      entry ? fmt::format(" at t = {:g}", coarse.run.samples[*entry].t) : " (never entered)")};
}

Verdict decay_condition(const SweepData& s, const MarginCertificate& cert) {
  const auto& fine = s.runs.at(1e-8);
  std::size_t checked = 0, bad = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& k : fine.run.samples) {
    if (k.x.norm() < cert.r_star) continue;
    ++checked;
    ControlDecision d;
    d.objective_lower_bound = k.objective_lower_bound;
    worst = std::max(worst, k.objective_lower_bound);
    if (!check_eq26(d, cert)) ++bad;
  }
  return {bad == 0 && checked > 0,
          fmt::format("{} of {} samples with |x| >= r* = {:.4g} violate inf <= -3/4 w_bar = {:.3g}; largest "
                      "lower bound {:.3g}",
                      bad, checked, cert.r_star, -0.75 * cert.w_bar, worst)};
}

Verdict scalar_certificate(const std::vector<MarginCertificate>& others) {
  const auto cfg = load_config(fs::path(SHSTAB_CONFIG_DIR) / "scalar.ini");
  const auto c = build_certificate(make_system(cfg.system_name, cfg.system_dim),
                                   make_clf(cfg.clf_name, cfg.decay_coefficient), cfg.R, cfg.r, cfg.certificate);
  bool all_inside = c.r_star <= c.r;
  for (const auto& o : others) all_inside = all_inside && o.r_star <= o.r;
  const bool hand = std::abs(c.v_star - 0.01) <= 1e-3 && std::abs(c.r_star - 0.05) <= 1e-3;
  return {hand && all_inside, fmt::format("v* = {:.6g}, r* = {:.6g}; r* <= r on {} certificates: {}", c.v_star,
                                          c.r_star, others.size() + 1, all_inside ? "yes" : "no")};
}

Verdict integrator_order() {
  const auto input = [](double t) { return std::cos(3.0 * t) + 0.5 * std::sin(t); };
  const auto exact = [](double t) { return std::sin(3.0 * t) / 3.0 - 0.5 * std::cos(t) + 0.5; };
  const TimeVaryingField rhs = [&](double t, const Vector&) { return Vector::Constant(1, input(t)); };
  const double horizon = 2.0;
  std::vector<double> errors;
  for (int steps = 8; steps <= 64; steps *= 2) {
    errors.push_back(std::abs(integrate_rk4(rhs, 0.0, Vector::Zero(1), horizon, steps)[0] - exact(horizon)));
  }
  bool ok = true;
  std::string ratios;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double q = errors[i - 1] / errors[i];
    ok = ok && q >= 12.0 && q <= 20.0;
    ratios += fmt::format("{}{:.3f}", i > 1 ? ", " : "", q);
  }
  return {ok, "error ratios per halving: " + ratios};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
  const fs::path base = fs::temp_directory_path() / "shstab_acceptance_determinism";
  fs::remove_all(base);
  const fs::path cfg = fs::path(SHSTAB_CONFIG_DIR) / "nonholonomic.ini";
  for (const char* name : {"first", "second"}) {
    const std::string cmd = fmt::format("\"{}\" run \"{}\" --output-dir \"{}\" > /dev/null", SHSTAB_CLI_PATH,
                                        cfg.string(), (base / name).string());
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(base / "first")) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    if (slurp(entry.path()) != slurp(base / "second" / entry.path().filename())) ++differing;
  }
  fs::remove_all(base);
  return {compared > 0 && differing == 0, fmt::format("{} CSV files compared, {} differ", compared, differing)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Verdict()>& body) {
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, fmt::format("error: {}", e.what())};
    }
    if (!v.pass) ++failures;
    std::cout << fmt::format("{} criterion {}: {}\n    {}\n", v.pass ? "PASS" : "FAIL", id, name, v.detail)
              << std::flush;
  };

  report(1, "quadratic envelope matches its closed form", quadratic_oracle);
  report(2, "near-minimizers stay in the localization ball", localization);
  report(3, "envelope sandwich with the alpha recipe", sandwich);
  report(4, "second-order envelope expansion", taylor);

  std::optional<SweepData> data;
  std::vector<MarginCertificate> certs;
  std::string setup_error;
  try {
    data = sweep();
    certs.push_back(build_certificate(make_system(data->cfg.system_name, data->cfg.system_dim),
                                      make_clf(data->cfg.clf_name, data->cfg.decay_coefficient), data->cfg.R,
                                      data->cfg.r, data->cfg.certificate));
    for (double r : {0.05, 0.2, 0.5}) {
      certs.push_back(build_certificate(nonholonomic_integrator(), nonholonomic_clf(0.01), 2.0, r));
    }
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto needs_data = [&](const std::function<Verdict()>& body) -> std::function<Verdict()> {
    return [&, body] { return data && !certs.empty() ? body() : Verdict{false, "setup failed: " + setup_error}; };
  };

  report(5, "accuracy sweep orders the terminal vicinities", needs_data([&] { return reproduction(*data); }));
  report(6, "sample-wise decay of the envelope", needs_data([&] { return samplewise_decay(*data); }));
  report(7, "certified control objective along the compliant run",
         needs_data([&] { return decay_condition(*data, certs.front()); }));
  report(8, "scalar certificate and r* <= r", [&] { return scalar_certificate(certs); });
  report(9, "fourth-order integrator", integrator_order);
  report(10, "byte-identical CSV output", determinism);

  std::cout << fmt::format("{} of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
