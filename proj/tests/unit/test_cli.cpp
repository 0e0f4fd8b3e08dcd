#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#ifdef TRENDWATCH_CLI_PATH

namespace fs = std::filesystem;

namespace {

struct Result {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("trendwatch_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto r = run("simulate --run-dir " + (dir_ / "sim").string());
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static Result run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string("cd '") + dir_.string() + "' && '" + TRENDWATCH_CLI_PATH + "' " + args +
                            " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string detect_args(const std::string& run_dir) {
    return "detect --run-dir " + run_dir + " --panel sim/panel.csv --truth sim/truth.csv --nulls sim/nulls.csv";
  }

  static fs::path dir_;
};

fs::path CliTest::dir_;

}  // namespace

TEST_F(CliTest, DetectDefaultsWriteReport) {
  const auto r = run(detect_args("d1") + " --streams clean");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "d1" / "report.json"));
  for (const auto* key : {"power", "mean_delay", "realized_fpr", "threshold", "intervals"})
    EXPECT_TRUE(report.contains(key)) << key;
  EXPECT_EQ(report["fpr_target"], 0.05);
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "d1" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "detect");
  EXPECT_NE(manifest["config"].get<std::string>().find("window=21"), std::string::npos);
  EXPECT_EQ(manifest["inputs"].size(), 3u);
  std::set<std::string> outputs;
  for (const auto& o : manifest["outputs"]) outputs.insert(o["path"].get<std::string>());
  EXPECT_EQ(outputs, (std::set<std::string>{"alarms.csv", "report.json"}));
}

TEST_F(CliTest, UnknownStreamIsUsageError) {
  const auto r = run(detect_args("d2") + " --streams nosuchstream");
  EXPECT_EQ(r.exit_code, 2);
  const auto err = nlohmann::json::parse(r.err);
  EXPECT_EQ(err["error"]["kind"], "usage");
  EXPECT_NE(err["error"]["message"].get<std::string>().find("nosuchstream"), std::string::npos);
}

TEST_F(CliTest, ArgumentErrorsExitTwo) {
  EXPECT_EQ(run("").exit_code, 2);
  EXPECT_EQ(run("frobnicate").exit_code, 2);
  EXPECT_EQ(run("detect --streams clean").exit_code, 2);
  EXPECT_EQ(run(detect_args("d3") + " --streams clean --fpr 1.5").exit_code, 2);
  EXPECT_EQ(run("--help").exit_code, 0);
}

TEST_F(CliTest, MalformedPanelExitsThree) {
  std::ofstream(dir_ / "bad.csv") << "region_id,stream_id,date\nA,s,2021-01-01\n";
  auto r = run("ingest --run-dir i1 --input bad.csv");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["code"], "schema");

  std::ofstream(dir_ / "dup.csv") << "region_id,stream_id,date,value\nA,s,2021-01-01,1\nA,s,2021-01-01,2\n";
  r = run("ingest --run-dir i2 --input dup.csv");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["code"], "duplicate");
}

TEST_F(CliTest, DegenerateNetworkExitsFour) {
  std::ofstream meta(dir_ / "flat_meta.csv");
  meta << "region_id,state_code,latitude,longitude,population\n";
  for (int i = 0; i < 6; ++i) meta << "Z" << i << ",AA,40,-100,\n";
  meta.close();
  ASSERT_EQ(run("network --run-dir g1 --baseline geo --meta flat_meta.csv").exit_code, 0);
  const auto r = run("network --run-dir g2 --baseline geo --meta flat_meta.csv --compare g1/distances.csv");
  EXPECT_EQ(r.exit_code, 4) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["kind"], "numeric");
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(run(detect_args("r1") + " --streams clean,medium,noisy --fuse").exit_code, 0);
  ASSERT_EQ(run(detect_args("r2") + " --streams clean,medium,noisy --fuse --jobs 3").exit_code, 0);
  for (const auto* f : {"alarms.csv", "report.json"})
    EXPECT_EQ(slurp(dir_ / "r1" / f), slurp(dir_ / "r2" / f)) << f;

  auto m1 = nlohmann::json::parse(slurp(dir_ / "r1" / "manifest.json"));
  auto m2 = nlohmann::json::parse(slurp(dir_ / "r2" / "manifest.json"));
  EXPECT_EQ(m1["outputs"], m2["outputs"]);
  EXPECT_EQ(m1["inputs"], m2["inputs"]);
}

TEST_F(CliTest, ConfigFileMatchesFlags) {
  std::ofstream(dir_ / "detect.toml") << "[detect]\n"
                                         "panel = \"sim/panel.csv\"\n"
                                         "truth = \"sim/truth.csv\"\n"
                                         "nulls = \"sim/nulls.csv\"\n"
                                         "streams = [\"noisy\"]\n"
                                         "window = 14\n"
                                         "fpr = 0.1\n";
  ASSERT_EQ(run("--config detect.toml detect --run-dir c1").exit_code, 0);
  ASSERT_EQ(run(detect_args("c2") + " --streams noisy --window 14 --fpr 0.1").exit_code, 0);
  EXPECT_EQ(slurp(dir_ / "c1" / "alarms.csv"), slurp(dir_ / "c2" / "alarms.csv"));
  // Flags take precedence over the file.
  ASSERT_EQ(run("--config detect.toml detect --run-dir c3 --fpr 0.05").exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "c3" / "report.json"))["fpr_target"], 0.05);
}

TEST_F(CliTest, TimestampedRunDirectory) {
  const auto r = run("simulate --out-root runs --seed 3");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const fs::path made = r.out.substr(0, r.out.find('\n'));
  EXPECT_EQ(made.parent_path(), fs::path("runs"));
  // <YYYYMMDDTHHMMSSZ>-<12 hex digits>
  EXPECT_EQ(made.filename().string().size(), 16u + 1u + 12u);
  EXPECT_TRUE(fs::exists(dir_ / made / "manifest.json"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / made / "manifest.json"))["seed"], 3);
}

TEST_F(CliTest, PipelineCommands) {
  EXPECT_EQ(run("smooth --run-dir p1 --panel sim/panel.csv --region R001 --streams clean,noisy").exit_code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "p1" / "growth.csv"));
  EXPECT_EQ(run("fuse --run-dir p2 --panel sim/panel.csv --streams clean,noisy --regions R001,R002").exit_code, 0);
  EXPECT_EQ(slurp(dir_ / "p2" / "fused.csv").substr(0, 30), "region_id,date,z,p,n_streams\nR");
  EXPECT_EQ(run("network --run-dir p3 --baseline geo --meta sim/meta.csv --k 3").exit_code, 0);
  EXPECT_EQ(run("cluster --run-dir p4 --distances p3/distances.csv --k 4").exit_code, 0);
  EXPECT_EQ(run("evaluate --run-dir p5 --panel sim/panel.csv --truth sim/truth.csv --nulls sim/nulls.csv "
                "--streams clean --windows 7,21")
                .exit_code,
            0);
  const auto sweep = slurp(dir_ / "p5" / "sweep.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 3);
  EXPECT_EQ(run("detect --run-dir p6 --panel sim/panel.csv --truth sim/truth.csv --nulls sim/nulls.csv "
                "--streams noisy --graph p3/graph.csv")
                .exit_code,
            0);
}

#endif
