#include "shstab/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace shstab {
namespace {

namespace fs = std::filesystem;

const char* kScalar = R"(
[system]
name = quadratic-test
dim = 1

[clf]
name = quadratic
decay_coefficient = 1

[experiment]
x0 = 0.9
delta = 0.01
horizon = 0.5
substeps = 4
alpha = 0.1
eta_sweep = 1e-2, 1e-6
eps_policy = tie-to-eta
terminal_window = 0.1

[verdict]
R = 1
r = 0.1

[output]
dir = out
seed = 3

[certificate]
sphere_directions = 2
)";

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("shstab_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& text, const std::string& name = "cfg.ini") {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string replaced(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return text.replace(pos, from.size(), to);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  int run(const fs::path& cfg, const fs::path& out_dir, bool dense = false) {
    CliOverrides o;
    o.output_dir = out_dir;
    o.dense = dense;
    return run_command(cfg, o, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(ExperimentTest, LoadsEveryField) {
  const auto c = load_config(write_config(kScalar));
  EXPECT_EQ(c.system_name, "quadratic-test");
  EXPECT_EQ(c.system_dim, 1);
  EXPECT_EQ(c.x0.size(), 1);
  EXPECT_DOUBLE_EQ(c.x0[0], 0.9);
  ASSERT_EQ(c.eta_sweep.size(), 2u);
  EXPECT_DOUBLE_EQ(c.eps_for(1), 1e-3);
  EXPECT_EQ(c.substeps, 4);
  EXPECT_DOUBLE_EQ(c.bound_radius, 1.5);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.certificate.sphere_directions, 2u);
  EXPECT_TRUE(c.inject_inaccuracy);
}

TEST_F(ExperimentTest, ExplicitEpsilonList) {
  const auto c = load_config(write_config(replaced(kScalar, "tie-to-eta", "0.1, 0.01")));
  EXPECT_DOUBLE_EQ(c.eps_for(0), 0.1);
  EXPECT_DOUBLE_EQ(c.eps_for(1), 0.01);
  EXPECT_THROW(load_config(write_config(replaced(kScalar, "tie-to-eta", "0.1"))), ConfigError);
}

TEST_F(ExperimentTest, InvalidValuesAreConfigErrors) {
  EXPECT_THROW(load_config(write_config(replaced(kScalar, "horizon = 0.5", "horizon = 0"))), ConfigError);
  EXPECT_THROW(load_config(write_config(replaced(kScalar, "r = 0.1", "r = 1"))), ConfigError);
  EXPECT_THROW(load_config(write_config(replaced(kScalar, "name = quadratic-test", "name = cart"))), ConfigError);
  EXPECT_THROW(load_config(write_config(replaced(kScalar, "delta = 0.01", "delta = fast"))), ConfigError);
  EXPECT_THROW(load_config(write_config(replaced(kScalar, "x0 = 0.9", "x0 = 0.9, 1"))), ConfigError);
  EXPECT_THROW(load_config(write_config(replaced(kScalar, "alpha = 0.1\n", ""))), ConfigError);
  EXPECT_THROW(load_config(dir_ / "missing.ini"), IoError);
}

TEST_F(ExperimentTest, ExitCodes) {
  EXPECT_EQ(run(write_config(replaced(kScalar, "horizon = 0.5", "horizon = 0")), dir_ / "a"), kExitConfig);
  EXPECT_EQ(run(dir_ / "missing.ini", dir_ / "a"), kExitIo);

  std::ofstream(dir_ / "blocker") << "a file, not a directory";
  EXPECT_EQ(run(write_config(kScalar), dir_ / "blocker" / "sub"), kExitIo);

  CliOverrides o;
  o.output_dir = dir_ / "cert";
  EXPECT_EQ(certify_command(write_config(replaced(kScalar, "r = 0.1", "r = 2")), o, out_, err_), kExitConfig);
}

TEST_F(ExperimentTest, RunWritesArtifacts) {
  ASSERT_EQ(run(write_config(kScalar), dir_ / "out"), kExitOk) << err_.str();
  for (const char* f : {"run_eta_0.01.csv", "run_eta_1e-06.csv", "run_eta_0.01.events.csv", "summary.csv",
                        "plot_data.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
  }
  std::ifstream in(dir_ / "out" / "run_eta_1e-06.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,x_1,u_1,V,V_alpha_lo,V_alpha_hi,eps_achieved,eta_achieved");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 51u);  // 1 + horizon / delta
}

TEST_F(ExperimentTest, DenseRowsAreAdded) {
  ASSERT_EQ(run(write_config(kScalar), dir_ / "out", true), kExitOk) << err_.str();
  std::ifstream in(dir_ / "out" / "run_eta_0.01.csv");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 1u + 51u + 50u * 3u);  // interior substeps only
}

TEST_F(ExperimentTest, OutputIsByteIdentical) {
  const auto cfg = write_config(kScalar);
  ASSERT_EQ(run(cfg, dir_ / "one"), kExitOk);
  ASSERT_EQ(run(cfg, dir_ / "two"), kExitOk);
  for (const char* f : {"run_eta_0.01.csv", "run_eta_1e-06.csv", "summary.csv", "plot_data.csv"}) {
    EXPECT_EQ(slurp(dir_ / "one" / f), slurp(dir_ / "two" / f)) << f;
  }
}

TEST_F(ExperimentTest, SweepPointMatchesFullSweep) {
  auto cfg = load_config(write_config(kScalar));
  const auto all = run_sweep(cfg);
  const auto one = run_single(cfg, 1);
  ASSERT_EQ(all[1].run.samples.size(), one.run.samples.size());
  EXPECT_EQ(all[1].run.samples.back().x, one.run.samples.back().x);
  EXPECT_EQ(all[1].case1_decayed, one.case1_decayed);
  EXPECT_THROW(run_single(cfg, 2), std::out_of_range);
}

TEST_F(ExperimentTest, CertifyWritesBothFiles) {
  CliOverrides o;
  o.output_dir = dir_ / "cert";
  ASSERT_EQ(certify_command(write_config(kScalar), o, out_, err_), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "cert" / "certificate.txt"));
  EXPECT_TRUE(fs::exists(dir_ / "cert" / "certificate_report.txt"));
  EXPECT_NE(slurp(dir_ / "cert" / "certificate.txt").find("r_star = "), std::string::npos);
}

TEST(Selftest, AllChecksPass) {
  std::ostringstream out;
  EXPECT_EQ(selftest_command(out), kExitOk) << out.str();
}

}  // namespace
}  // namespace shstab
