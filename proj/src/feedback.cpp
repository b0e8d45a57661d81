#include "shstab/feedback.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace shstab {
namespace {

constexpr double kAffineTolerance = 1e-12;
constexpr int kMaxRefinements = 3;

double objective_at(const ControlSystem& sys, const EnvelopeResult& env, const Vector& u) {
  return env.subgradient.dot(sys(env.minimizer, u));
}

struct GridScan {
  std::vector<Vector> inputs;
  std::vector<double> values;
  std::size_t argmin = 0;
};

GridScan scan(const ControlSystem& sys, const EnvelopeResult& env, const std::vector<Vector>& inputs) {
  GridScan s;
  s.inputs = inputs;
  s.values.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    s.values.push_back(objective_at(sys, env, inputs[i]));
    if (s.values[i] < s.values[s.argmin]) s.argmin = i;
  }
  return s;
}

// Lexicographically smallest input among exact ties of the minimum.
std::size_t tie_break(const GridScan& s) {
  std::size_t best = s.argmin;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (s.values[i] == s.values[s.argmin] &&
        std::lexicographical_compare(s.inputs[i].begin(), s.inputs[i].end(),
                                     s.inputs[best].begin(), s.inputs[best].end())) {
      best = i;
    }
  }
  return best;
}

// Largest value in [inf, inf + eta]; ties go to the lexicographically smallest input.
std::size_t degraded_choice(const GridScan& s, double inf, double eta) {
  std::size_t best = tie_break(s);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double v = s.values[i];
    if (v > inf + eta) continue;
    const bool better = v > s.values[best] ||
                        (v == s.values[best] &&
                         std::lexicographical_compare(s.inputs[i].begin(), s.inputs[i].end(),
                                                      s.inputs[best].begin(), s.inputs[best].end()));
    if (better) best = i;
  }
  return best;
}

// Sampled Lipschitz constant of the objective in u between grid neighbours.
double input_lipschitz(const GridScan& s, int res, const Box& box) {
  const auto m = box.dim();
  double q = 0.0;
  std::size_t stride = 1;
  for (Eigen::Index axis = m - 1; axis >= 0; --axis) {
    const double spacing = (box.hi[axis] - box.lo[axis]) / (res - 1);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const auto idx = (i / stride) % static_cast<std::size_t>(res);
      if (idx + 1 < static_cast<std::size_t>(res) && spacing > 0.0) {
        q = std::max(q, std::abs(s.values[i + stride] - s.values[i]) / spacing);
      }
    }
    stride *= static_cast<std::size_t>(res);
  }
  return kSafetyInflation * q;
}

}  // namespace

void FeedbackConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("feedback: alpha must lie in (0, 1)");
  if (!(eps_x > 0.0)) throw std::invalid_argument("feedback: eps_x must be positive");
  if (!(eta_x > 0.0)) throw std::invalid_argument("feedback: eta_x must be positive");
  if (input_grid_res < 2) throw std::invalid_argument("feedback: input_grid_res must be >= 2");
  if (!(v_bar > 0.0)) throw std::invalid_argument("feedback: v_bar must be positive");
  if (!(clf_lipschitz > 0.0)) throw std::invalid_argument("feedback: clf_lipschitz must be positive");
}

bool is_control_affine(const ControlSystem& sys, const Vector& x) {
  const Box& box = sys.input_box;
  const Vector c = box.center();
  const Vector h = box.half_widths();
  const Vector fc = sys(x, c);
  std::vector<Vector> slope;
  double scale = fc.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    Vector up = c, down = c;
    up[i] += h[i];
    down[i] -= h[i];
    const Vector fu = sys(x, up), fd = sys(x, down);
    scale = std::max({scale, fu.lpNorm<Eigen::Infinity>(), fd.lpNorm<Eigen::Infinity>()});
    if ((fu + fd - 2.0 * fc).lpNorm<Eigen::Infinity>() > kAffineTolerance * (1.0 + scale)) return false;
    slope.push_back(0.5 * (fu - fd));
  }
  for (const auto& v : box_vertices(box)) {
    Vector predicted = fc;
    for (Eigen::Index i = 0; i < box.dim(); ++i) {
      if (h[i] > 0.0) predicted += slope[i] * ((v[i] - c[i]) / h[i]);
    }
    if ((sys(x, v) - predicted).lpNorm<Eigen::Infinity>() > kAffineTolerance * (1.0 + scale)) return false;
  }
  return true;
}

ControlDecision select_control(const ControlSystem& sys, const EnvelopeResult& env,
                               const FeedbackConfig& cfg) {
  cfg.validate();
  ControlDecision d;
  d.envelope = env;

  const bool affine = is_control_affine(sys, env.minimizer);
  int res = cfg.input_grid_res;
  GridScan grid = scan(sys, env, input_grid(sys.input_box, res));
  double inf = 0.0;
  if (affine) {
    // A linear function on a box attains its minimum at a vertex.
    const GridScan vertices = scan(sys, env, box_vertices(sys.input_box));
    inf = std::min(vertices.values[vertices.argmin], grid.values[grid.argmin]);
  } else {
    for (int refinement = 0;; ++refinement) {
      const double spacing = (sys.input_box.hi - sys.input_box.lo).norm() / (res - 1);
      inf = grid.values[grid.argmin] - 0.5 * spacing * input_lipschitz(grid, res, sys.input_box);
      if (grid.values[grid.argmin] - inf <= cfg.eta_x || refinement == kMaxRefinements) break;
      res = 2 * res - 1;
      grid = scan(sys, env, input_grid(sys.input_box, res));
    }
  }

  const std::size_t pick = cfg.inject_inaccuracy ? degraded_choice(grid, inf, cfg.eta_x) : tie_break(grid);
  d.input = grid.inputs[pick];
  d.objective_value = grid.values[pick];
  d.objective_lower_bound = std::min(inf, d.objective_value);
  d.eta_achieved = d.objective_value - d.objective_lower_bound;
  if (affine && !cfg.inject_inaccuracy) {
    // Vertices belong to the grid, so the pick is the exact minimum up to roundoff.
    d.eta_achieved = std::max(0.0, d.eta_achieved);
  }
  if (d.eta_achieved > cfg.eta_x) {
    throw FeedbackError("select_control: input grid cannot certify eta_x", FeedbackStage::kSelection, d);
  }
  return d;
}

ControlDecision infc_feedback(const ControlSystem& sys, const Clf& clf, const Vector& x,
                              const FeedbackConfig& cfg) {
  cfg.validate();
  const double v_bar = std::max(cfg.v_bar, clf(x));
  const double lipschitz = objective_lipschitz(clf, x, cfg.alpha, v_bar, cfg.clf_lipschitz);
  EnvelopeResult env;
  bool envelope_failed = false;
  std::string failure;
  try {
    env = envelope(clf, x, cfg.alpha, cfg.eps_x * cfg.eps_x, v_bar, lipschitz, cfg.envelope);
  } catch (const EnvelopeBudgetError& e) {
    env = e.best();
    envelope_failed = true;
    failure = e.what();
  }
  ControlDecision d;
  try {
    d = select_control(sys, env, cfg);
  } catch (const FeedbackError& e) {
    if (envelope_failed) throw FeedbackError(failure, FeedbackStage::kEnvelope, e.best());
    throw;
  }
  if (envelope_failed) throw FeedbackError(failure, FeedbackStage::kEnvelope, d);
  return d;
}

}  // namespace shstab
