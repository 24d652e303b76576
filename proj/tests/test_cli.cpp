#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = UPSILON_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("upsilon_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
  fs::path dir;
};

const char* kConfig = R"([experiment]
kind = sweep
seeds = 2
ratios = 0.5
variants = Baseline, Upsilon
write_logs = true

[benchmark]
d = 6
m_unlabeled = 100
n_labeled_per_class = 4
n_test_per_class = 10

[train]
epochs = 6
pretrain_epochs = 2
batch_size = 32
)";

}  // namespace

TEST_F(Cli, RunWritesArtifactsAndReruns) {
  const auto cfg = write("c.ini", kConfig);
  ASSERT_EQ(run("run --config " + cfg.string() + " --out " + (dir / "a").string() + " --workers 2"), 0);
  ASSERT_EQ(run("run --config " + cfg.string() + " --out " + (dir / "b").string() + " --workers 1"), 0);
  for (const char* f : {"results.csv", "rounds.csv", "manifest.json", "plots/accuracy.svg"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  EXPECT_FALSE(fs::is_empty(dir / "a" / "logs"));
  EXPECT_EQ(slurp(dir / "a" / "results.csv"), slurp(dir / "b" / "results.csv"));
  EXPECT_EQ(slurp(dir / "a" / "rounds.csv"), slurp(dir / "b" / "rounds.csv"));
  EXPECT_NE(slurp(dir / "a" / "manifest.json").find("\"config_sha1\""), std::string::npos);
}

TEST_F(Cli, ConfigViolationExitsOne) {
  EXPECT_EQ(run("run --config " + write("bad.ini", "[train]\ntau = 2\n").string()), 1);
  EXPECT_EQ(run("run --config " + write("unknown.ini", "[experiment]\nfoo = 1\n").string()), 1);
  EXPECT_EQ(run("run --config " + (dir / "missing.ini").string()), 1);
}

TEST_F(Cli, RuntimeFailureExitsTwo) {
  // A huge kernel exponent underflows every entry of P^reg.
  std::string text = kConfig;
  text += "sinkhorn_reg = 1e6\n";
  EXPECT_EQ(run("run --config " + write("c.ini", text).string() + " --out " + (dir / "o").string()), 2);
}

TEST_F(Cli, PlotCommand) {
  const auto csv = write("r.csv", "row_type,series,x,seed_index,metric,value\ncell,A,1,0,acc,0.5\ncell,B,1,0,acc,0.7\n");
  const auto spec = write("s.spec", "y = value\nfilter.metric = acc\n");
  EXPECT_EQ(run("plot --csv " + csv.string() + " --spec " + spec.string() + " --out " + (dir / "p.svg").string()), 0);
  EXPECT_NE(slurp(dir / "p.svg").find("<svg"), std::string::npos);
  const auto empty = write("e.csv", "");
  EXPECT_NE(run("plot --csv " + empty.string() + " --out " + (dir / "q.svg").string()), 0);
  EXPECT_FALSE(fs::exists(dir / "q.svg"));
}
