#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shstab/clf.hpp"
#include "shstab/feedback.hpp"
#include "shstab/systems.hpp"

namespace shstab {

/// Sampled sphere extrema of V on a radius grid, made monotone.
struct RhoLambda {
  std::vector<double> radii;       // strictly increasing
  std::vector<double> sphere_min;  // running min from above: non-decreasing, <= min of V on the sphere
  std::vector<double> sphere_max;  // running max from below: sup of V over the ball of that radius

  /// Lower bound of V outside the open ball of radius s: the table value at
  /// the largest grid radius <= s. Throws if s is below the grid.
  double rho(double s) const;
  /// Largest grid radius s with sup_{|x| <= s} V < v, or 0 if none.
  double lambda(double v) const;
  /// Sampled sup of V over the ball of radius s (the next grid radius >= s).
  double ball_sup(double s) const;
};

/// Builds the tables from `direction_count` sphere directions per radius.
/// Throws std::invalid_argument for empty or non-increasing grids.
RhoLambda rho_lambda(const Clf& clf, int dim, std::span<const double> radius_grid,
                     std::size_t direction_count = 2000, std::uint64_t seed = 1);

/// Sampled modulus of continuity of V on a ball.
struct ModulusTable {
  std::vector<double> distances;    // strictly increasing
  std::vector<double> oscillation;  // non-decreasing, inflated by 1.1

  /// Oscillation bound at distance d (next tabulated distance >= d).
  double at(double d) const;
  /// Largest tabulated distance whose oscillation is <= eps, or 0 if none.
  double inverse(double eps) const;
};

ModulusTable modulus_of_continuity(const Clf& clf, int dim, double ball_radius,
                                   std::span<const double> distance_grid,
                                   std::size_t pair_count = 2000, std::uint64_t seed = 1);

struct CertificateOptions {
  std::size_t sphere_directions = 2000;
  double radius_ratio = 1.002;
  std::size_t constant_samples = 4000;
  std::size_t modulus_pairs = 2000;
  double distance_ratio = 1.2;
  std::size_t probe_points = 64;
  std::size_t probe_directions = 16;
  double probe_mu_min = 1e-16;
  std::uint64_t seed = 1;
};

/// One named constraint of the bound chain with its value.
struct BoundTerm {
  std::string bound;  // which certificate field it limits
  std::string name;
  double value = 0.0;
};

struct MarginCertificate {
  std::string system_name;
  std::string clf_name;
  double R = 0.0;
  double r = 0.0;
  double R_star = 0.0;
  double v_bar = 0.0;
  double v_star_cap = 0.0;
  double theta = 0.0;
  double v_star = 0.0;
  double r_star = 0.0;
  double big_radius = 0.0;
  double f_bar = 0.0;
  double lipschitz_L_f = 0.0;
  double w_bar = 0.0;
  ModulusTable omega_V_table;
  double mu = 0.0;                  // uniformity step at nu = w_bar / 5
  std::size_t mu_flagged = 0;       // probe samples on the excluded singular set
  std::size_t mu_samples = 0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double alpha_max = 0.0;
  double delta_max = 0.0;
  double eps_bound = 0.0;
  double eta_bound = 0.0;
  double reaching_time = 0.0;  // 4 (v_bar - v_star / 2) / w_bar
  std::vector<BoundTerm> terms;
};

/// Raised when a bound in the chain is not strictly positive.
class InfeasibleCertificate : public std::runtime_error {
 public:
  InfeasibleCertificate(const std::string& constraint, const std::string& what)
      : std::runtime_error(what), constraint_(constraint) {}
  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

/// Computes the constants of the practical-stability argument for start
/// radius R and target radius r, then the admissible alpha, delta, eps and
/// eta. Throws std::invalid_argument unless 0 < r < R and
/// InfeasibleCertificate when a bound collapses.
MarginCertificate build_certificate(const ControlSystem& sys, const Clf& clf, double R, double r,
                                    const CertificateOptions& opts = {});

/// Certified control-objective infimum <= -3/4 w_bar.
bool check_eq26(const ControlDecision& decision, const MarginCertificate& cert);

/// `name = value` lines, one constant per line.
std::string serialize(const MarginCertificate& cert);

/// Human-readable listing of every constraint with the binding one marked.
std::string report(const MarginCertificate& cert);

}  // namespace shstab
