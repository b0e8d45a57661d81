#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "shstab/margins.hpp"
#include "shstab/sim.hpp"

namespace shstab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed experiment file. Sections: [system], [clf], [experiment],
/// [verdict], [output] and optionally [certificate].
struct ExperimentConfig {
  std::string system_name = "nonholonomic";
  int system_dim = 3;
  std::string clf_name = "nonholonomic";
  double decay_coefficient = 0.01;

  Vector x0;
  double delta = 0.005;
  double horizon = 10.0;
  int substeps = 10;
  double alpha = 0.1;
  std::vector<double> eta_sweep;
  std::vector<double> eps_sweep;  // empty means eps^2 = eta
  int input_grid_res = 11;
  double v_bar = 0.0;             // 0 means V(x0)
  bool inject_inaccuracy = true;
  double terminal_window = 2.0;
  bool dense = false;

  double R = 2.0;
  double r = 0.1;
  double bound_radius = 3.0;

  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  CertificateOptions certificate;

  /// Accuracy eps_x for the i-th sweep point.
  double eps_for(std::size_t i) const;
  /// Throws ConfigError on a violated invariant.
  void validate() const;
};

/// Reads an INI-style file. Throws ConfigError on missing or malformed keys
/// and IoError if the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOutcome {
  double eta = 0.0;
  double eps = 0.0;
  SampleHoldRun run;
  StabilityVerdict verdict;
  double terminal_mean_norm = 0.0;
  double min_decay = 0.0;           // min over Case-1 samples of lower(k) - upper(k+1)
  std::size_t case1_samples = 0;
  std::size_t case1_decayed = 0;    // strict certified decrease
  std::size_t budget_failures = 0;
};

/// Threshold v*/2 separating the decay cases, from the sphere minimum of V at r.
double case1_threshold(const Clf& clf, int dim, double r, std::uint64_t seed);

/// Simulates every sweep point, concurrently, and evaluates each run.
std::vector<RunOutcome> run_sweep(const ExperimentConfig& cfg);

/// Simulates the sweep point `index` alone.
RunOutcome run_single(const ExperimentConfig& cfg, std::size_t index);

/// Writes per-run CSVs with event sidecars, summary.csv and plot_data.csv.
void write_run_artifacts(const ExperimentConfig& cfg, const std::vector<RunOutcome>& outcomes);

/// Writes certificate.txt and certificate_report.txt.
MarginCertificate write_certificate(const ExperimentConfig& cfg);

struct CliOverrides {
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::uint64_t> seed;
  bool dense = false;
};

/// Exit codes of the command-line verbs.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

int run_command(const std::filesystem::path& config, const CliOverrides& overrides,
                std::ostream& out, std::ostream& err);
int certify_command(const std::filesystem::path& config, const CliOverrides& overrides,
                    std::ostream& out, std::ostream& err);

/// Quick property checks over every module. Returns kExitOk when all pass.
int selftest_command(std::ostream& out);

}  // namespace shstab
