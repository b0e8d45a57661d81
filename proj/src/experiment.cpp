#include "shstab/experiment.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "shstab/sampling.hpp"

namespace shstab {
namespace {

namespace pt = boost::property_tree;

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size()) throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(fmt::format("{}: empty list entry", key));
    out.push_back(parse_double(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return *v;
    return std::nullopt;
  }
  std::string required(const std::string& key) const {
    auto v = raw(key);
    if (!v) throw ConfigError(fmt::format("missing config key '{}'", key));
    return *v;
  }
  void real(const std::string& key, double& target) const {
    if (auto v = raw(key)) target = parse_double(key, *v);
  }
  void integer(const std::string& key, int& target) const {
    if (auto v = raw(key)) {
      const double d = parse_double(key, *v);
      if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(fmt::format("{}: not an integer", key));
      target = static_cast<int>(d);
    }
  }
  void count(const std::string& key, std::size_t& target) const {
    int v = static_cast<int>(target);
    integer(key, v);
    if (v < 0) throw ConfigError(fmt::format("{}: must be non-negative", key));
    target = static_cast<std::size_t>(v);
  }
  void boolean(const std::string& key, bool& target) const {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") {
        target = true;
      } else if (*v == "false" || *v == "0" || *v == "no") {
        target = false;
      } else {
        throw ConfigError(fmt::format("{}: expected true or false", key));
      }
    }
  }

 private:
  const pt::ptree& tree_;
};

std::string number(double v) { return fmt::format("{:.17g}", v); }

std::string optional_number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
  }
}

std::string run_stem(double eta) { return fmt::format("run_eta_{:g}", eta); }

RunOutcome run_point(const ExperimentConfig& cfg, std::size_t i, double threshold) {
  const ControlSystem sys = make_system(cfg.system_name, cfg.system_dim);
  const Clf clf = make_clf(cfg.clf_name, cfg.decay_coefficient);
  RunOutcome o;
  o.eta = cfg.eta_sweep[i];
  o.eps = cfg.eps_for(i);

  FeedbackConfig fb;
  fb.alpha = cfg.alpha;
  fb.eps_x = o.eps;
  fb.eta_x = o.eta;
  fb.input_grid_res = cfg.input_grid_res;
  fb.v_bar = cfg.v_bar > 0.0 ? cfg.v_bar : std::max(clf(cfg.x0), std::numeric_limits<double>::min());
  fb.inject_inaccuracy = cfg.inject_inaccuracy;

  SimOptions so;
  so.delta = cfg.delta;
  so.horizon = cfg.horizon;
  so.substeps = cfg.substeps;
  so.dense = cfg.dense;
  so.target_radius = cfg.r;
  o.run = simulate(sys, clf, fb, cfg.x0, so);
  o.verdict = verdict(o.run, cfg.R, cfg.r, cfg.bound_radius);

  double sum = 0.0;
  std::size_t n = 0;
  const double window_start = cfg.horizon - cfg.terminal_window;
  for (const auto& s : o.run.samples) {
    if (s.t >= window_start - 1e-9 * cfg.delta) {
      sum += s.x.norm();
      ++n;
    }
    if (s.budget_failure) ++o.budget_failures;
  }
  o.terminal_mean_norm = n > 0 ? sum / n : std::nan("");

  o.min_decay = std::numeric_limits<double>::infinity();
  for (const auto& d : samplewise_strict_decrease(o.run, threshold)) {
    ++o.case1_samples;
    if (d.decayed) ++o.case1_decayed;
    o.min_decay = std::min(o.min_decay, -d.amount);
  }
  if (o.case1_samples == 0) o.min_decay = std::nan("");
  return o;
}

void write_run_csv(const std::filesystem::path& path, const RunOutcome& o, const Clf& clf, int n, int m) {
  auto out = open_output(path);
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  for (int j = 1; j <= m; ++j) out << ",u_" << j;
  out << ",V,V_alpha_lo,V_alpha_hi,eps_achieved,eta_achieved\n";

  auto sample_row = [&](const SampleRecord& s) {
    out << number(s.t);
    for (int i = 0; i < n; ++i) out << ',' << number(s.x[i]);
    for (int j = 0; j < m; ++j) out << ',' << number(s.u[j]);
    out << ',' << number(s.V) << ',' << number(s.V_alpha_lo) << ',' << number(s.V_alpha_hi) << ','
        << number(s.eps_achieved) << ',' << number(s.eta_achieved) << '\n';
  };
  const auto& samples = o.run.samples;
  const auto& dense = o.run.dense_states;
  if (dense.empty()) {
    for (const auto& s : samples) sample_row(s);
  } else {
    // Substep rows carry the held input and leave the envelope columns empty.
    const auto per = static_cast<std::size_t>(o.run.substeps);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      sample_row(samples[k]);
      if (k + 1 == samples.size()) break;
      for (std::size_t j = 1; j < per; ++j) {
        const auto& d = dense[k * per + j];
        out << number(d.t);
        for (int i = 0; i < n; ++i) out << ',' << number(d.x[i]);
        for (int i = 0; i < m; ++i) out << ',' << number(d.u[i]);
        out << ',' << number(clf(d.x)) << ",,,,\n";
      }
    }
  }
  finish(out, path);
}

void write_events_csv(const std::filesystem::path& path, const RunOutcome& o) {
  auto out = open_output(path);
  out << "t,event,detail\n";
  for (const auto& e : o.run.events) {
    std::string detail = e.detail;
    for (auto& ch : detail) {
      if (ch == '"') ch = '\'';
    }
    out << number(e.t) << ',' << to_string(e.kind) << ",\"" << detail << "\"\n";
  }
  finish(out, path);
}

}  // namespace

double ExperimentConfig::eps_for(std::size_t i) const {
  return eps_sweep.empty() ? std::sqrt(eta_sweep.at(i)) : eps_sweep.at(i);
}

void ExperimentConfig::validate() const {
  if (eta_sweep.empty()) throw ConfigError("experiment.eta_sweep must not be empty");
  for (double e : eta_sweep) {
    if (!(e > 0.0)) throw ConfigError("experiment.eta_sweep entries must be positive");
  }
  if (!eps_sweep.empty() && eps_sweep.size() != eta_sweep.size()) {
    throw ConfigError("experiment.eps_policy list must match eta_sweep in length");
  }
  for (double e : eps_sweep) {
    if (!(e > 0.0)) throw ConfigError("experiment.eps_policy entries must be positive");
  }
  if (!(delta > 0.0)) throw ConfigError("experiment.delta must be positive");
  if (!(horizon > 0.0)) throw ConfigError("experiment.horizon must be positive");
  if (!(horizon >= delta)) throw ConfigError("experiment.horizon must be at least delta");
  if (substeps < 1) throw ConfigError("experiment.substeps must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("experiment.alpha must lie in (0, 1)");
  if (input_grid_res < 2) throw ConfigError("experiment.input_grid_res must be >= 2");
  if (v_bar < 0.0) throw ConfigError("experiment.v_bar must be non-negative");
  if (!(terminal_window >= 0.0)) throw ConfigError("experiment.terminal_window must be non-negative");
  if (!(r > 0.0 && r < R)) throw ConfigError("verdict: need 0 < r < R");
  if (!(bound_radius >= R)) throw ConfigError("verdict.bound_radius must be >= R");
  if (x0.size() == 0) throw ConfigError("experiment.x0 is missing");
  try {
    const auto sys = make_system(system_name, system_dim);
    make_clf(clf_name, decay_coefficient);
    if (x0.size() != sys.state_dim) {
      throw ConfigError(fmt::format("experiment.x0 has {} entries, the system has {} states", x0.size(),
                                    sys.state_dim));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.message()));
  }
  const Reader rd(tree);
  ExperimentConfig c;
  c.system_name = rd.required("system.name");
  rd.integer("system.dim", c.system_dim);
  c.clf_name = rd.required("clf.name");
  rd.real("clf.decay_coefficient", c.decay_coefficient);

  const auto x0 = parse_list("experiment.x0", rd.required("experiment.x0"));
  c.x0 = Eigen::Map<const Vector>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  c.delta = parse_double("experiment.delta", rd.required("experiment.delta"));
  c.horizon = parse_double("experiment.horizon", rd.required("experiment.horizon"));
  rd.integer("experiment.substeps", c.substeps);
  c.alpha = parse_double("experiment.alpha", rd.required("experiment.alpha"));
  c.eta_sweep = parse_list("experiment.eta_sweep", rd.required("experiment.eta_sweep"));
  if (auto policy = rd.raw("experiment.eps_policy"); policy && *policy != "tie-to-eta") {
    c.eps_sweep = parse_list("experiment.eps_policy", *policy);
  }
  rd.integer("experiment.input_grid_res", c.input_grid_res);
  rd.real("experiment.v_bar", c.v_bar);
  rd.boolean("experiment.inject_inaccuracy", c.inject_inaccuracy);
  rd.real("experiment.terminal_window", c.terminal_window);
  rd.boolean("experiment.dense", c.dense);

  c.R = parse_double("verdict.R", rd.required("verdict.R"));
  c.r = parse_double("verdict.r", rd.required("verdict.r"));
  c.bound_radius = 1.5 * c.R;
  rd.real("verdict.bound_radius", c.bound_radius);

  if (auto dir = rd.raw("output.dir")) c.output_dir = *dir;
  int seed = static_cast<int>(c.seed);
  rd.integer("output.seed", seed);
  if (seed < 0) throw ConfigError("output.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);

  auto& co = c.certificate;
  rd.count("certificate.sphere_directions", co.sphere_directions);
  rd.real("certificate.radius_ratio", co.radius_ratio);
  rd.count("certificate.constant_samples", co.constant_samples);
  rd.count("certificate.modulus_pairs", co.modulus_pairs);
  rd.real("certificate.distance_ratio", co.distance_ratio);
  rd.count("certificate.probe_points", co.probe_points);
  rd.count("certificate.probe_directions", co.probe_directions);
  rd.real("certificate.probe_mu_min", co.probe_mu_min);
  if (!(co.radius_ratio > 1.0) || !(co.distance_ratio > 1.0)) {
    throw ConfigError("certificate grid ratios must exceed 1");
  }
  co.seed = c.seed;

  c.validate();
  return c;
}

double case1_threshold(const Clf& clf, int dim, double r, std::uint64_t seed) {
  const double grid[] = {r};
  return 0.5 * rho_lambda(clf, dim, grid, 2000, seed).rho(r);
}

std::vector<RunOutcome> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const Clf clf = make_clf(cfg.clf_name, cfg.decay_coefficient);
  const double threshold = case1_threshold(clf, static_cast<int>(cfg.x0.size()), cfg.r, cfg.seed);
  std::vector<RunOutcome> outcomes(cfg.eta_sweep.size());
  std::vector<std::exception_ptr> errors(cfg.eta_sweep.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < cfg.eta_sweep.size(); ++i) {
      workers.emplace_back([&, i] {
        try {
          outcomes[i] = run_point(cfg, i, threshold);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outcomes;
}

RunOutcome run_single(const ExperimentConfig& cfg, std::size_t index) {
  cfg.validate();
  if (index >= cfg.eta_sweep.size()) throw std::out_of_range("sweep index out of range");
  const Clf clf = make_clf(cfg.clf_name, cfg.decay_coefficient);
  return run_point(cfg, index, case1_threshold(clf, static_cast<int>(cfg.x0.size()), cfg.r, cfg.seed));
}

void write_run_artifacts(const ExperimentConfig& cfg, const std::vector<RunOutcome>& outcomes) {
  ensure_dir(cfg.output_dir);
  const ControlSystem sys = make_system(cfg.system_name, cfg.system_dim);
  const Clf clf = make_clf(cfg.clf_name, cfg.decay_coefficient);
  for (const auto& o : outcomes) {
    const auto stem = run_stem(o.eta);
    write_run_csv(cfg.output_dir / (stem + ".csv"), o, clf, sys.state_dim, sys.input_dim());
    write_events_csv(cfg.output_dir / (stem + ".events.csv"), o);
  }

  const auto summary_path = cfg.output_dir / "summary.csv";
  auto summary = open_output(summary_path);
  summary << "eta,eps,terminal_mean_norm,first_entry_time,stayed,bounded,min_decay,case1_samples,"
             "case1_decayed,budget_failures\n";
  for (const auto& o : outcomes) {
    summary << number(o.eta) << ',' << number(o.eps) << ',' << number(o.terminal_mean_norm) << ','
            << optional_number(o.verdict.entered_at) << ',' << (o.verdict.stayed ? "true" : "false") << ','
            << (o.verdict.bounded ? "true" : "false") << ',' << number(o.min_decay) << ',' << o.case1_samples
            << ',' << o.case1_decayed << ',' << o.budget_failures << '\n';
  }
  finish(summary, summary_path);

  const auto plot_path = cfg.output_dir / "plot_data.csv";
  auto plot = open_output(plot_path);
  plot << "eta,t,norm_x,V\n";
  for (const auto& o : outcomes) {
    if (o.run.dense_states.empty()) {
      for (const auto& s : o.run.samples) {
        plot << number(o.eta) << ',' << number(s.t) << ',' << number(s.x.norm()) << ',' << number(s.V) << '\n';
      }
    } else {
      for (const auto& s : o.run.dense_states) {
        plot << number(o.eta) << ',' << number(s.t) << ',' << number(s.x.norm()) << ',' << number(clf(s.x))
             << '\n';
      }
    }
  }
  finish(plot, plot_path);
}

MarginCertificate write_certificate(const ExperimentConfig& cfg) {
  const ControlSystem sys = make_system(cfg.system_name, cfg.system_dim);
  const Clf clf = make_clf(cfg.clf_name, cfg.decay_coefficient);
  const MarginCertificate cert = build_certificate(sys, clf, cfg.R, cfg.r, cfg.certificate);
  ensure_dir(cfg.output_dir);
  const auto cert_path = cfg.output_dir / "certificate.txt";
  auto out = open_output(cert_path);
  out << serialize(cert);
  finish(out, cert_path);
  const auto report_path = cfg.output_dir / "certificate_report.txt";
  auto rep = open_output(report_path);
  rep << report(cert);
  finish(rep, report_path);
  return cert;
}

namespace {

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InfeasibleCertificate& e) {
    err << e.what() << '\n';
    return kExitFailure;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

ExperimentConfig with_overrides(ExperimentConfig cfg, const CliOverrides& o) {
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.certificate.seed = *o.seed;
  }
  if (o.dense) cfg.dense = true;
  return cfg;
}

}  // namespace

int run_command(const std::filesystem::path& config, const CliOverrides& overrides, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = with_overrides(load_config(config), overrides);
    const auto outcomes = run_sweep(cfg);
    write_run_artifacts(cfg, outcomes);
    out << fmt::format("{:>10} {:>12} {:>16} {:>12} {:>7} {:>8}\n", "eta", "eps", "terminal |x|", "entered",
                       "stayed", "bounded");
    for (const auto& o : outcomes) {
      out << fmt::format("{:>10g} {:>12g} {:>16.6g} {:>12} {:>7} {:>8}\n", o.eta, o.eps, o.terminal_mean_norm,
                         o.verdict.entered_at ? fmt::format("{:g}", *o.verdict.entered_at) : "-",
                         o.verdict.stayed ? "yes" : "no", o.verdict.bounded ? "yes" : "no");
    }
    out << "artifacts written to " << cfg.output_dir.string() << '\n';
    return kExitOk;
  });
}

int certify_command(const std::filesystem::path& config, const CliOverrides& overrides, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = with_overrides(load_config(config), overrides);
    const auto cert = write_certificate(cfg);
    out << report(cert);
    out << "certificate written to " << (cfg.output_dir / "certificate.txt").string() << '\n';
    return kExitOk;
  });
}

}  // namespace shstab
