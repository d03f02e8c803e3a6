#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lwta/checkpoint.hpp"
#include "lwta/runner.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(LWTA_BIN) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("lwta_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& f) const { return (dir_ / f).string(); }

  // small but real training run
  std::string train_args(const std::string& tag, const std::string& iters) const {
    return "train --blocks 4,2 --task-batch 2 --inner-steps 2 --inner-lr 0.01 "
           "--init-log-var-shift -8 --kl-weight 0.001 --grad-clip 10 --seed 3 --iters " +
           iters + " --checkpoint " + path(tag + ".lwck") + " --metrics-out " + path(tag + ".csv");
  }

  fs::path dir_;
};

std::vector<std::string> lines_without_wallclock(const std::string& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line.substr(0, line.rfind(',')));
  return out;
}

}  // namespace

TEST_F(Cli, UnknownFlagIsConfigError) {
  EXPECT_EQ(run_cli("train --inner-rate 3").code, 2);
  EXPECT_EQ(run_cli("train --task sine-nope --iters 0 --checkpoint " + path("a") +
                 " --metrics-out " + path("b"))
                .code,
            2);
}

TEST_F(Cli, ConfigDumpListsEveryKey) {
  const auto r = run_cli("config --dump --iters 9");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("iters = 9"), std::string::npos);
  for (const auto& k : lwta::config_keys()) {
    EXPECT_NE(r.out.find(k.name + " = "), std::string::npos) << k.name;
  }
}

TEST_F(Cli, ZeroIterationRunStoresInitialization) {
  ASSERT_EQ(run_cli(train_args("zero", "0")).code, 0);
  const auto ck = lwta::load_checkpoint(path("zero.lwck"));
  lwta::Config cfg;
  for (const auto& [k, v] : ck.config) cfg.set(k, v);
  EXPECT_TRUE(ck.net == lwta::init_network(cfg, lwta::make_tasks(cfg)));
  EXPECT_EQ(lines_without_wallclock(path("zero.csv")).size(), 1u);  // header only
}

TEST_F(Cli, SameSeedSameMetrics) {
  ASSERT_EQ(run_cli(train_args("a", "3")).code, 0);
  ASSERT_EQ(run_cli(train_args("b", "3")).code, 0);
  const auto a = lines_without_wallclock(path("a.csv"));
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(a, lines_without_wallclock(path("b.csv")));
  EXPECT_EQ(a.front(), "iter,elbo_total,likelihood,kl_xi,kl_w,eval_metric");
}

TEST_F(Cli, PointDeterministicAblationArmRuns) {
  EXPECT_EQ(run_cli(train_args("abl", "2") +
                 " --task sine-challenging --weights point --activation deterministic_lwta")
                .code,
            0);
}

TEST_F(Cli, EvalIsRepeatable) {
  ASSERT_EQ(run_cli(train_args("ev", "2")).code, 0);
  const std::string args = "eval --checkpoint " + path("ev.lwck") + " --num-eval-tasks 3";
  const auto a = run_cli(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out.rfind("metric,mean,std,predict_ms,tasks\nmse,", 0), 0u) << a.out;
  // drop predict_ms, a wallclock figure
  auto stable = [](const std::string& s) {
    const auto line = s.substr(s.find('\n') + 1);
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    return cols.at(1) + "," + cols.at(2) + "," + cols.at(4);
  };
  EXPECT_EQ(stable(a.out), stable(run_cli(args).out));
}

TEST_F(Cli, EvalTaskMismatchIsConfigError) {
  ASSERT_EQ(run_cli(train_args("mm", "0")).code, 0);
  EXPECT_EQ(run_cli("eval --checkpoint " + path("mm.lwck") + " --task synth-class").code, 2);
}

TEST_F(Cli, MissingCheckpointIsDataError) {
  EXPECT_EQ(run_cli("eval --checkpoint " + path("nope.lwck")).code, 3);
}

TEST_F(Cli, ActiveLearnCsvAndStrategyCheck) {
  ASSERT_EQ(run_cli(train_args("al", "1")).code, 0);
  const std::string base = "active-learn --checkpoint " + path("al.lwck") +
                           " --num-tasks 1 --candidate-pool 20 --eval-inner-steps 2";
  const auto a = run_cli(base + " --strategy random");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out.rfind("step,mean_mse,std_mse\n", 0), 0u) << a.out;
  EXPECT_EQ(a.out, run_cli(base + " --strategy random").out);
  EXPECT_EQ(run_cli(base + " --strategy greedy").code, 2);
}

TEST_F(Cli, DivergenceExitCode) {
  const auto r = run_cli("train --blocks 4,2 --task-batch 2 --inner-steps 5 --inner-lr 1e6 --iters 30 "
                         "--checkpoint " + path("div.lwck") + " --metrics-out " + path("div.csv"));
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(fs::exists(path("div.lwck")));
}
