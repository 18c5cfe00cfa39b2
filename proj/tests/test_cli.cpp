#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "jkoflow/cli.hpp"
#include "jkoflow/error.hpp"

using namespace jkoflow;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = JKOFLOW_CONFIG_DIR;

struct Invocation {
  int code = 0;
  std::string out, err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "jkoflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Invocation r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

class Scratch : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("jkoflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

// A small single-species problem; `extra` is spliced into the scheme block.
std::string small_config(const std::string& initial, const std::string& scheme_extra = "",
                         const std::string& grid = R"({"lower": -3, "upper": 3, "cells": 64})") {
  return R"({"grid": )" + grid + R"(,
    "species": [{"energy": {"kind": "entropy"}}],
    "initial": [)" + initial + R"(],
    "scheme": {"h": 0.01, "T": 0.1)" + scheme_extra + R"(}})";
}

}  // namespace

TEST_F(Scratch, ValidateShippedConfigs) {
  for (const char* name : {"heat", "barenblatt", "gibbs", "coupled", "coupled_shifted", "plane_entropic"}) {
    const Invocation r = invoke({"validate", (kConfigs / (std::string(name) + ".json")).string()});
    EXPECT_EQ(r.code, 0) << name << "\n" << r.out << r.err;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
  }
}

TEST_F(Scratch, ValidateRejectsNegativeKernel) {
  const fs::path cfg = write("neg.json", R"({"grid": {"lower": -1, "upper": 1, "cells": 32},
    "species": [{"energy": {"kind": "entropy"}}],
    "initial": [{"profile": "gaussian", "sigma": 0.2}],
    "interaction": {"kernels": [[{"family": "gaussian", "A": -0.5, "sigma": 1}]]},
    "scheme": {"h": 0.01, "T": 0.1}})");
  const Invocation r = invoke({"validate", cfg.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("amplitude"), std::string::npos);
}

TEST_F(Scratch, ValidateRejectsAtomLikeData) {
  const fs::path cfg = write("atom.json", small_config(R"({"profile": "uniform", "support": [0.0, 0.001]})", "",
                                                       R"({"lower": -1, "upper": 1, "cells": 1024})"));
  const Invocation r = invoke({"validate", cfg.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("blows up"), std::string::npos) << r.err;
  // Running refuses the same data.
  EXPECT_EQ(invoke({"run", cfg.string(), "--output", (dir_ / "o").string()}).code, 1);
  EXPECT_FALSE(fs::exists(dir_ / "o"));
}

TEST_F(Scratch, ValidateReportsSchemaErrors) {
  const fs::path cfg = write("typo.json", small_config(R"({"profile": "gaussian", "sigma": 0.3})", R"(, "tolerance": 1)"));
  EXPECT_EQ(invoke({"validate", cfg.string()}).code, 2);
  EXPECT_EQ(invoke({"validate", (dir_ / "missing.json").string()}).code, 2);
}

TEST_F(Scratch, RunHeatBaselineWritesOutputs) {
  const fs::path out = dir_ / "heat";
  const Invocation r = invoke({"run", (kConfigs / "heat.json").string(), "--output", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"index.json", "summary.json", "timeseries.csv", "species0_step000000.csv",
                        "species0_step000125.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_TRUE(summary.at("pass").get<bool>());
  EXPECT_LE(summary.at("checks").at("reference_l1_error").at("statistic").get<double>(), 0.02);
  for (const char* key : {"mass_defect", "renormalization_excess", "dissipation_excess", "action",
                          "max_optimality_residual"})
    EXPECT_TRUE(summary.at("checks").contains(key)) << key;
  for (const char* key : {"L2H1", "L1W11", "action"})
    EXPECT_TRUE(summary.at("species").at(0).contains(key)) << key;
  EXPECT_TRUE(summary.at("certification").contains("C_lip"));
  // timeseries: header plus one row per step including t = 0.
  std::istringstream ts(slurp(out / "timeseries.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(ts, line)) ++rows;
  EXPECT_EQ(rows, 1 + 126);
}

TEST_F(Scratch, SnapshotCountFollowsRecordEvery) {
  for (int every : {1, 3, 4, 10, 20}) {
    const fs::path cfg = write("c.json", small_config(R"({"profile": "gaussian", "sigma": 0.4})",
                                                      ", \"record_every\": " + std::to_string(every)));
    const fs::path out = dir_ / ("out" + std::to_string(every));
    ASSERT_EQ(invoke({"run", cfg.string(), "--output", out.string()}).code, 0);
    int snaps = 0;
    for (const auto& e : fs::directory_iterator(out)) snaps += e.path().filename().string().rfind("species0_", 0) == 0;
    const int steps = 10;
    EXPECT_EQ(snaps, (steps + every - 1) / every + 1) << every;
    EXPECT_EQ(snapshot_steps(steps, every).size(), static_cast<std::size_t>(snaps));
  }
}

TEST_F(Scratch, RerunIsBitIdentical) {
  const fs::path a = dir_ / "a", b = dir_ / "b";
  const std::string cfg = (kConfigs / "coupled.json").string();
  ASSERT_EQ(invoke({"run", cfg, "--output", a.string()}).code, 0);
  ASSERT_EQ(invoke({"run", cfg, "--output", b.string(), "--threads", "1"}).code, 0);
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
}

TEST_F(Scratch, SolverFailureExitsWithStep) {
  const fs::path cfg = write("fail.json", small_config(R"({"profile": "gaussian", "sigma": 0.4})",
                                                       R"(, "solver": "entropic", "max_iter": 1, "tol": 1e-14)"));
  const Invocation r = invoke({"run", cfg.string(), "--output", (dir_ / "o").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("step 1"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"run", cfg.string(), "--output", (dir_ / "o").string(), "--best-effort"}).code, 0);
}

TEST_F(Scratch, ConvergenceHeat) {
  const Invocation r = invoke({"convergence", (kConfigs / "heat.json").string(), "--levels",
                               "0.002,0.001,0.0005", "--output", dir_.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("monotone error decrease: yes"), std::string::npos) << r.out;
  std::istringstream csv(slurp(dir_ / "convergence.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> err, sums;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream s(line);
    std::string x;
    while (std::getline(s, x, ',')) f.push_back(x);
    err.push_back(std::stod(f[2]));
    sums.push_back(std::stod(f[4]));
  }
  ASSERT_EQ(err.size(), 3u);
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[2], err[1]);
  // sum_k W2^2 ~ h * int |v|^2: halves with h.
  EXPECT_NEAR(sums[1] / sums[0], 0.5, 0.05);
  EXPECT_NEAR(sums[2] / sums[1], 0.5, 0.05);
}

TEST_F(Scratch, ConvergenceUsageErrors) {
  const std::string cfg = (kConfigs / "heat.json").string();
  EXPECT_EQ(invoke({"convergence", cfg, "--levels", "0.002"}).code, 2);
  EXPECT_EQ(invoke({"convergence", cfg, "--levels", "0.002,0.0015,0.001"}).code, 2);
  EXPECT_EQ(invoke({"convergence", cfg, "--levels", "0.002,x,0.0005"}).code, 2);
  EXPECT_EQ(invoke({"convergence", cfg}).code, 2);
  EXPECT_THROW(check_levels({0.4, 0.2}), ConfigError);
  EXPECT_NO_THROW(check_levels({0.4, 0.2, 0.1, 0.05}));
}

TEST_F(Scratch, CompareRuns) {
  const fs::path a = dir_ / "a", b = dir_ / "b", c = dir_ / "c";
  const fs::path ca = write("a.json", small_config(R"({"profile": "gaussian", "mean": -0.5, "sigma": 0.4})", R"(, "record_every": 2)"));
  const fs::path cb = write("b.json", small_config(R"({"profile": "gaussian", "mean": 0.6, "sigma": 0.3})", R"(, "record_every": 2)"));
  const fs::path cc = write("c.json", small_config(R"({"profile": "gaussian", "sigma": 0.3})", R"(, "record_every": 2)",
                                                   R"({"lower": -3, "upper": 3, "cells": 96})"));
  ASSERT_EQ(invoke({"run", ca.string(), "--output", a.string()}).code, 0);
  ASSERT_EQ(invoke({"run", cb.string(), "--output", b.string()}).code, 0);
  ASSERT_EQ(invoke({"run", cc.string(), "--output", c.string()}).code, 0);

  const Invocation same = invoke({"compare", a.string(), a.string()});
  ASSERT_EQ(same.code, 0);
  std::istringstream s(same.out);
  std::string line;
  std::getline(s, line);
  int rows = 0;
  while (std::getline(s, line) && line.find("growth") == std::string::npos) {
    std::istringstream f(line);
    double t, w;
    f >> t >> w;
    EXPECT_EQ(w, 0.0);
    ++rows;
  }
  EXPECT_EQ(rows, 6);

  const Invocation diff = invoke({"compare", a.string(), b.string()});
  ASSERT_EQ(diff.code, 0);
  std::istringstream d(diff.out);
  std::getline(d, line);
  double prev = INFINITY;
  while (std::getline(d, line) && line.find("growth") == std::string::npos) {
    std::istringstream f(line);
    double t, w;
    f >> t >> w;
    EXPECT_LE(w, prev + 1e-12);
    prev = w;
  }
  EXPECT_NE(diff.out.find("PASS"), std::string::npos);

  const Invocation bad = invoke({"compare", a.string(), c.string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("different grids"), std::string::npos);
  EXPECT_EQ(invoke({"compare", a.string(), (dir_ / "nowhere").string()}).code, 2);
}

TEST_F(Scratch, BinaryExitCodes) {
  const std::string bin = JKOFLOW_CLI;
  auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("validate " + (kConfigs / "heat.json").string()), 0);
  EXPECT_EQ(status(""), 2);
  EXPECT_EQ(status("frobnicate"), 2);
  EXPECT_EQ(status("--help"), 0);
  const fs::path neg = write("neg.json", R"({"grid": {"lower": -1, "upper": 1, "cells": 16},
    "species": [{"energy": {"kind": "entropy"}}], "initial": [{"profile": "gaussian", "sigma": 0.3}],
    "interaction": {"kernels": [[{"family": "constant", "A": -2}]]}, "scheme": {"h": 0.1, "T": 0.1}})");
  EXPECT_EQ(status("validate " + neg.string()), 2);
}
