#include "shstab/infconv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace shstab {
namespace {

// Relative roundoff allowance for inequality checks whose two sides are
// algebraically equal in the tight case.
constexpr double kRoundoff = 1e-12;

struct Cell {
  Vector lo;
  Vector hi;
  double center_value = 0.0;
  double lower = 0.0;
  std::size_t seq = 0;
};

struct CellOrder {
  bool operator()(const Cell& a, const Cell& b) const {
    if (a.lower != b.lower) return a.lower > b.lower;
    return a.seq > b.seq;
  }
};

class EnvelopeSolver {
 public:
  EnvelopeSolver(const Clf& clf, const Vector& x, double alpha, double v_bar,
                 double obj_lipschitz, const EnvelopeOptions& opts)
      : clf_(clf),
        x_(x),
        alpha_(alpha),
        inv2a2_(1.0 / (2.0 * alpha * alpha)),
        v_bar_(v_bar),
        lipschitz_(obj_lipschitz),
        radius_(std::sqrt(2.0 * v_bar) * alpha),
        opts_(opts) {}

  EnvelopeResult solve(double eps_target) {
    // y = x is always feasible and g >= 0.
    best_y_ = x_;
    best_ = clf_(x_);
    ++evals_;
    global_floor_ = 0.0;
    if (best_ - global_floor_ <= eps_target) return result(0.0);

    seed_grid();
    refine_incumbent();
    certify(eps_target);
    return result(current_lower());
  }

  EnvelopeResult partial() const { return result(current_lower()); }

 private:
  double objective(const Vector& y) {
    ++evals_;
    return clf_(y) + (y - x_).squaredNorm() * inv2a2_;
  }

  bool in_ball(const Vector& y) const { return (y - x_).norm() <= radius_; }

  bool offer(const Vector& y, double value) {
    if (value < best_ && in_ball(y)) {
      best_ = value;
      best_y_ = y;
      return true;
    }
    return false;
  }

  double cell_lower(const Vector& lo, const Vector& hi, double center_value) const {
    const Vector c = 0.5 * (lo + hi);
    const Vector h = 0.5 * (hi - lo);
    double lb = center_value - lipschitz_ * h.norm();
    // Quadratic term minimized exactly over the box; V >= 0.
    const Vector nearest = x_.cwiseMax(lo).cwiseMin(hi);
    lb = std::max(lb, (nearest - x_).squaredNorm() * inv2a2_);
    if (clf_.has_gradient_enclosure()) {
      const auto g = clf_.gradient_enclosure(Box(lo, hi));
      double drop = 0.0;
      for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double a = (c[i] - x_[i]) * 2.0 * inv2a2_;
        drop += h[i] * std::max(std::abs(g[i].lo + a), std::abs(g[i].hi + a));
      }
      lb = std::max(lb, center_value - drop);
    }
    return lb;
  }

  void push(Vector lo, Vector hi, double eps_target) {
    const Vector c = 0.5 * (lo + hi);
    const double value = objective(c);
    offer(c, value);
    const double lb = cell_lower(lo, hi, value);
    if (lb >= best_ - eps_target) {
      pruned_floor_ = std::min(pruned_floor_, lb);
      return;
    }
    cells_.push(Cell{std::move(lo), std::move(hi), value, lb, seq_++});
  }

  void seed_grid() {
    const int n = static_cast<int>(x_.size());
    const int k = std::max(1, opts_.grid_cells_per_axis);
    const double width = 2.0 * radius_ / k;
    std::vector<int> idx(n, 0);
    // Initial cells are kept even when prunable so the grid minima can seed
    // the pattern searches; pruning happens in certify().
    std::size_t lex = 0;
    while (true) {
      Vector lo(n), hi(n);
      for (int i = 0; i < n; ++i) {
        lo[i] = x_[i] - radius_ + width * idx[i];
        hi[i] = (idx[i] == k - 1) ? x_[i] + radius_ : lo[i] + width;
      }
      const Vector c = 0.5 * (lo + hi);
      const Vector nearest = x_.cwiseMax(lo).cwiseMin(hi);
      if ((nearest - x_).norm() <= radius_) {
        const double value = objective(c);
        grid_.push_back({lo, hi, value, 0.0, lex});
      }
      ++lex;
      int d = n - 1;
      while (d >= 0 && ++idx[d] == k) idx[d--] = 0;
      if (d < 0) break;
    }
    for (const auto& cell : grid_) offer(0.5 * (cell.lo + cell.hi), cell.center_value);
  }

  void pattern_search(Vector y, double value, double step) {
    const int n = static_cast<int>(y.size());
    const double tol = 1e-13 * (1.0 + x_.lpNorm<Eigen::Infinity>());
    while (step > tol && evals_ < opts_.max_evaluations) {
      bool moved = false;
      for (int i = 0; i < n && !moved; ++i) {
        for (double sgn : {1.0, -1.0}) {
          Vector trial = y;
          trial[i] += sgn * step;
          if (!in_ball(trial)) continue;
          const double v = objective(trial);
          if (v < value) {
            y = std::move(trial);
            value = v;
            moved = true;
            break;
          }
        }
      }
      if (!moved) step *= 0.5;
    }
    offer(y, value);
  }

  void refine_incumbent() {
    std::vector<std::size_t> order(grid_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return grid_[a].center_value < grid_[b].center_value;
    });
    const auto starts = std::min<std::size_t>(order.size(), std::max(0, opts_.refine_starts));
    for (std::size_t s = 0; s < starts; ++s) {
      const Cell& cell = grid_[order[s]];
      const double step = 0.25 * (cell.hi - cell.lo).maxCoeff();
      pattern_search(0.5 * (cell.lo + cell.hi), cell.center_value, step);
    }
  }

  double current_lower() const {
    double lb = std::min(pruned_floor_, v_bar_);
    if (!cells_.empty()) lb = std::min(lb, cells_.top().lower);
    lb = std::max(lb, global_floor_);
    return std::min(lb, best_);
  }

  void certify(double eps_target) {
    for (auto& cell : grid_) {
      const double lb = cell_lower(cell.lo, cell.hi, cell.center_value);
      if (lb >= best_ - eps_target) {
        pruned_floor_ = std::min(pruned_floor_, lb);
      } else {
        cells_.push(Cell{std::move(cell.lo), std::move(cell.hi), cell.center_value, lb, seq_++});
      }
    }
    grid_.clear();

    while (!cells_.empty() && best_ - current_lower() > eps_target) {
      if (evals_ >= opts_.max_evaluations) {
        throw EnvelopeBudgetError("envelope: evaluation budget exhausted", partial());
      }
      Cell cell = cells_.top();
      cells_.pop();
      if (cell.lower >= best_ - eps_target) {
        pruned_floor_ = std::min(pruned_floor_, cell.lower);
        continue;
      }
      Eigen::Index axis = 0;
      (cell.hi - cell.lo).maxCoeff(&axis);
      const double mid = 0.5 * (cell.lo[axis] + cell.hi[axis]);
      if (!(mid > cell.lo[axis] && mid < cell.hi[axis])) {
        throw EnvelopeBudgetError("envelope: cells reached floating-point resolution", partial());
      }
      Vector left_hi = cell.hi, right_lo = cell.lo;
      left_hi[axis] = mid;
      right_lo[axis] = mid;
      const double before = best_;
      push(cell.lo, std::move(left_hi), eps_target);
      push(std::move(right_lo), cell.hi, eps_target);
      if (best_ < before) {
        pattern_search(best_y_, best_, 0.25 * (cell.hi - cell.lo).maxCoeff());
      }
    }
  }

  EnvelopeResult result(double lower) const {
    EnvelopeResult r;
    r.query_point = x_;
    r.minimizer = best_y_;
    r.upper_value = best_;
    r.lower_bound = std::min(lower, best_);
    r.epsilon_achieved = best_ - r.lower_bound;
    r.alpha = alpha_;
    r.v_bar = v_bar_;
    r.subgradient = (x_ - best_y_) / (alpha_ * alpha_);
    r.evaluations = evals_;
    return r;
  }

  const Clf& clf_;
  Vector x_;
  double alpha_;
  double inv2a2_;
  double v_bar_;
  double lipschitz_;
  double radius_;
  EnvelopeOptions opts_;

  Vector best_y_;
  double best_ = std::numeric_limits<double>::infinity();
  double global_floor_ = 0.0;
  double pruned_floor_ = std::numeric_limits<double>::infinity();
  std::vector<Cell> grid_;
  std::priority_queue<Cell, std::vector<Cell>, CellOrder> cells_;
  std::size_t seq_ = 0;
  std::size_t evals_ = 0;
};

}  // namespace

double EnvelopeResult::localization_radius() const { return std::sqrt(2.0 * v_bar) * alpha; }

double envelope_objective(const Clf& clf, const Vector& x, const Vector& y, double alpha) {
  return clf(y) + (y - x).squaredNorm() / (2.0 * alpha * alpha);
}

double envelope_lipschitz(double clf_lipschitz, double v_bar, double alpha) {
  return clf_lipschitz + std::sqrt(2.0 * v_bar) / alpha;
}

double objective_lipschitz(const Clf& clf, const Vector& x, double alpha, double v_bar,
                           double clf_lipschitz) {
  if (!clf.has_gradient_enclosure()) return envelope_lipschitz(clf_lipschitz, v_bar, alpha);
  const double radius = std::sqrt(2.0 * v_bar) * alpha;
  const Vector reach = Vector::Constant(x.size(), radius);
  double sq = 0.0;
  for (const auto& g : clf.gradient_enclosure(Box(x - reach, x + reach))) sq += g.magnitude() * g.magnitude();
  // The cube's corners overshoot the ball, so the quadratic term uses the cube diagonal.
  return std::sqrt(sq) + std::sqrt(static_cast<double>(x.size())) * radius / (alpha * alpha);
}

EnvelopeResult envelope(const Clf& clf, const Vector& x, double alpha,
                        double eps_target, double v_bar, double obj_lipschitz,
                        const EnvelopeOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("envelope: alpha must lie in (0, 1)");
  if (!(eps_target > 0.0)) throw std::invalid_argument("envelope: eps_target must be positive");
  if (!(obj_lipschitz > 0.0)) throw std::invalid_argument("envelope: obj_lipschitz must be positive");
  if (!(v_bar >= clf(x))) throw std::invalid_argument("envelope: v_bar must bound V(x)");
  EnvelopeSolver solver(clf, x, alpha, v_bar, obj_lipschitz, opts);
  return solver.solve(eps_target);
}

bool verify_lemma1(const EnvelopeResult& result, double v_bar) {
  return (result.minimizer - result.query_point).norm() <= std::sqrt(2.0 * v_bar) * result.alpha;
}

double lemma2_alpha(double v_bar, double eps1, const std::function<double(double)>& omega) {
  const double a = omega(0.5 * eps1) / std::sqrt(2.0 * v_bar);
  return std::min(a, std::nextafter(1.0, 0.0));
}

bool verify_lemma2(const Clf& clf, const Vector& x, double alpha, double eps1,
                   double v_bar, double obj_lipschitz, const EnvelopeOptions& opts) {
  const auto r = envelope(clf, x, alpha, 0.25 * eps1, v_bar, obj_lipschitz, opts);
  const double vx = clf(x);
  return r.upper_value <= vx && vx <= r.lower_bound + eps1;
}

InequalityCheck check_taylor(const EnvelopeResult& result, const Clf& clf, double h,
                             const Vector& theta, double obj_lipschitz,
                             const EnvelopeOptions& opts) {
  const double a2 = result.alpha * result.alpha;
  const Vector shifted = result.query_point + h * theta;
  const double eps = result.epsilon_achieved;
  const double right = result.lower_bound + h * result.subgradient.dot(theta) +
                       h * h * theta.squaredNorm() / (2.0 * a2) + eps;

  double left = envelope_objective(clf, shifted, result.minimizer, result.alpha);
  const double v_shift = std::max(result.v_bar, clf(shifted));
  const double target = std::max(eps, 1e-12 * (1.0 + std::abs(right)));
  const auto fresh = envelope(clf, shifted, result.alpha, target, v_shift,
                              std::max(obj_lipschitz, envelope_lipschitz(0.0, v_shift, result.alpha)),
                              opts);
  left = std::min(left, fresh.upper_value);
  const double slack = right - left;
  return {slack >= -kRoundoff * (1.0 + std::abs(right)), slack};
}

InequalityCheck check_eps_subgradient(const EnvelopeResult& result, const Clf& clf,
                                      const Vector& z) {
  const Vector& y = result.minimizer;
  const double a2 = result.alpha * result.alpha;
  const double right = clf(y) + result.subgradient.dot(z - y) -
                       (z - y).squaredNorm() / (2.0 * a2) - result.epsilon_achieved;
  const double left = clf(z);
  const double slack = left - right;
  return {slack >= -kRoundoff * (1.0 + std::abs(left)), slack};
}

}  // namespace shstab
