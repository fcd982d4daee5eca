#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "liftpool/checkpoint.hpp"
#include "liftpool/cli.hpp"
#include "liftpool/errors.hpp"
#include "liftpool/signal_io.hpp"
#include "liftpool/tlp.hpp"

using namespace liftpool;
using namespace liftpool::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("liftpool_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run_cli(const std::vector<std::string>& args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  static std::string slurp(const std::string& p) { return harness::read_text_file(p); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST(ParseArgs, Examples) {
  const CommandConfig t = parse_args({"train", "--pool", "max", "--seed", "3"});
  EXPECT_EQ(t.command, Command::train);
  EXPECT_EQ(t.pool, "max");
  EXPECT_EQ(t.seed, 3u);
  EXPECT_EQ(t.kernel, 5u);
  EXPECT_EQ(t.fusion, "sum");
  EXPECT_EQ(t.alpha_u, 0.001);
  EXPECT_EQ(t.alpha_p, 0.001);

  const CommandConfig d = parse_args({"decompose", "--input", "sig.csv", "--out", "outdir"});
  EXPECT_EQ(d.command, Command::decompose);
  EXPECT_EQ(d.input, "sig.csv");
  EXPECT_EQ(d.out, "outdir");
  EXPECT_FALSE(d.reconstruct);

  const CommandConfig defaults = parse_args({"train"});
  EXPECT_EQ(defaults.pool, "tlp");
  EXPECT_EQ(defaults.seed, 0u);

  const CommandConfig c = parse_args({"compare", "--specs", "max,avg", "--seeds", "1"});
  EXPECT_EQ(c.specs, (std::vector<std::string>{"max", "avg"}));
  EXPECT_EQ(c.seeds, 1u);
}

TEST(ParseArgs, UsageErrors) {
  EXPECT_THROW(parse_args({"train", "--pool", "bogus"}), UsageError);
  EXPECT_THROW(parse_args({"train", "--frobnicate"}), UsageError);
  EXPECT_THROW(parse_args({"fly"}), UsageError);
  EXPECT_THROW(parse_args({}), UsageError);
  EXPECT_THROW(parse_args({"decompose", "--input", "x.csv"}), UsageError);
  EXPECT_THROW(parse_args({"train", "--fusion", "product"}), UsageError);
  EXPECT_THROW(parse_args({"train", "--lr", "-1"}), UsageError);
  EXPECT_THROW(parse_args({"compare", "--specs", "max,nope"}), UsageError);
  EXPECT_THROW(parse_args({"bench", "--repetitions", "3"}), UsageError);
  EXPECT_THROW(parse_args({"gradcheck", "--case", "no_such_case"}), UsageError);
  EXPECT_THROW(parse_args({"train", "--help"}), HelpRequested);
}

TEST(ResolvedConfig, ListsEveryField) {
  const nlohmann::json j = resolved_config(parse_args({"train", "--pool", "soft"}));
  EXPECT_EQ(j.at("command"), "train");
  EXPECT_EQ(j.at("pool"), "soft");
  for (const char* key : {"K", "fusion", "alpha_u", "alpha_p", "seed", "epochs", "lr", "batch_size", "task"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST_F(CliTest, DecomposeHaar) {
  harness::write_text_file(path("sig.csv"), "channel,t0,t1,t2,t3\n0,1,2,3,4\n");
  ASSERT_EQ(run_cli({"decompose", "--input", path("sig.csv"), "--out", path("o"), "--reconstruct"}), kExitOk)
      << err_.str();
  EXPECT_EQ(harness::read_signal_csv(path("o/s.csv")).storage(), (std::vector<double>{1.5, 3.5}));
  EXPECT_EQ(harness::read_signal_csv(path("o/d.csv")).storage(), (std::vector<double>{-1, -1}));
  EXPECT_EQ(harness::read_signal_csv(path("o/reconstruction.csv")).storage(), (std::vector<double>{1, 2, 3, 4}));
  const std::string bands = slurp(path("o/bands.csv"));
  EXPECT_EQ(bands.substr(0, bands.find('\n')), "signal,length,low,high,high_fraction");
  // The resolved configuration is logged on every run.
  EXPECT_NE(err_.str().find("\"command\""), std::string::npos);
}

TEST_F(CliTest, DecomposeLearnedCheckpointReconstructs) {
  std::mt19937_64 rng(3);
  tlp::TlpConfig cfg;
  cfg.channels = 3;
  tlp::TlpParams p = tlp::make_tlp(cfg, rng);
  std::normal_distribution<double> g(0.0, 0.7);
  p.visit([&](const std::string&, Tensor& t) {
    for (double& v : t.values()) v = g(rng);
  });
  tlp::write_json_file(path("tlp.json"), tlp::tlp_to_json(p, 1e-3, 1e-3));
  Tensor x({1, 3, 37});
  for (double& v : x.values()) v = g(rng) * 4.0;
  harness::write_text_file(path("sig.csv"), harness::signal_csv(x));
  ASSERT_EQ(run_cli({"decompose", "--input", path("sig.csv"), "--out", path("o"), "--checkpoint", path("tlp.json"),
                     "--reconstruct"}),
            kExitOk)
      << err_.str();
  const Tensor back = harness::read_signal_csv(path("o/reconstruction.csv"));
  EXPECT_LE(max_abs_diff(back, x), 1e-9);
  EXPECT_EQ(harness::read_signal_csv(path("o/s.csv")), tlp::lift(x, p).s);

  // Channel count must match the checkpoint.
  harness::write_text_file(path("two.csv"), "channel,t0,t1\n0,1,2\n1,3,4\n");
  EXPECT_EQ(run_cli({"decompose", "--input", path("two.csv"), "--out", path("o2"), "--checkpoint",
                     path("tlp.json")}),
            kExitIo);
}

TEST_F(CliTest, DecomposeIsByteIdentical) {
  Tensor x({1, 2, 50});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (double& v : x.values()) v = g(rng);
  harness::write_text_file(path("sig.csv"), harness::signal_csv(x));
  for (const char* o : {"a", "b"}) {
    ASSERT_EQ(run_cli({"decompose", "--input", path("sig.csv"), "--out", path(o), "--reconstruct"}), kExitOk);
  }
  for (const char* f : {"s.csv", "d.csv", "bands.csv", "reconstruction.csv"}) {
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
  }
  EXPECT_LE(max_abs_diff(harness::read_signal_csv(path("a/reconstruction.csv")), x), 1e-9);
}

TEST_F(CliTest, InputErrorsMapToExitCodes) {
  EXPECT_EQ(run_cli({"decompose", "--input", path("missing.csv"), "--out", path("o")}), kExitIo);
  harness::write_text_file(path("bad.csv"), "channel,t0\n0,oops\n");
  EXPECT_EQ(run_cli({"decompose", "--input", path("bad.csv"), "--out", path("o")}), kExitIo);
  harness::write_text_file(path("nan.csv"), "channel,t0,t1\n0,1,nan\n");
  EXPECT_EQ(run_cli({"decompose", "--input", path("nan.csv"), "--out", path("o")}), kExitNumerical);
  harness::write_text_file(path("ok.csv"), "channel,t0,t1\n0,1,2\n");
  harness::write_text_file(path("ckpt.json"), "{not json");
  EXPECT_EQ(run_cli({"decompose", "--input", path("ok.csv"), "--out", path("o"), "--checkpoint", path("ckpt.json")}),
            kExitIo);
  EXPECT_EQ(run_cli({"train", "--pool", "bogus"}), kExitUsage);
  EXPECT_FALSE(err_.str().empty());
  EXPECT_EQ(run_cli({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("decompose"), std::string::npos);
}

TEST_F(CliTest, TrainWritesDeterministicOutputs) {
  const std::vector<std::string> common{"--epochs", "2", "--train-size", "48", "--dev-size", "16", "--test-size", "16",
                                        "--seed", "5"};
  for (const char* o : {"a", "b"}) {
    std::vector<std::string> args{"train", "--out", path(o)};
    args.insert(args.end(), common.begin(), common.end());
    ASSERT_EQ(run_cli(args), kExitOk) << err_.str();
  }
  for (const char* f : {"metrics.csv", "checkpoint.json", "summary.json"}) {
    EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
  }
  const std::string metrics = slurp(path("a/metrics.csv"));
  EXPECT_EQ(metrics.rfind("epoch,task_loss,c_u,c_p,total,dev_acc\n", 0), 0u);
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 3);

  // A model checkpoint feeds decompose directly.
  Tensor x({1, 16, 20});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (double& v : x.values()) v = g(rng);
  harness::write_text_file(path("h.csv"), harness::signal_csv(x));
  ASSERT_EQ(run_cli({"decompose", "--input", path("h.csv"), "--out", path("dec"), "--checkpoint",
                     path("a/checkpoint.json"), "--layer", "2", "--reconstruct"}),
            kExitOk)
      << err_.str();
  EXPECT_LE(max_abs_diff(harness::read_signal_csv(path("dec/reconstruction.csv")), x), 1e-9);
}

TEST_F(CliTest, TrainNonFiniteLossExitsNumerical) {
  EXPECT_EQ(run_cli({"train", "--pool", "max", "--lr", "1e300", "--epochs", "3", "--train-size", "16", "--dev-size",
                     "8", "--test-size", "8", "--out", path("o")}),
            kExitNumerical);
}

TEST_F(CliTest, CompareTwoSpecsOneSeed) {
  const std::vector<std::string> args{"compare",      "--specs",     "max,avg", "--seeds",    "1",
                                      "--epochs",     "1",           "--train-size", "32", "--dev-size",
                                      "16",           "--test-size", "16",      "--out"};
  auto with_out = [&](const char* o) {
    auto a = args;
    a.push_back(path(o));
    return a;
  };
  ASSERT_EQ(run_cli(with_out("a")), kExitOk) << err_.str();
  ASSERT_EQ(run_cli(with_out("b")), kExitOk);
  const std::string table = slurp(path("a/compare.csv"));
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_EQ(table, slurp(path("b/compare.csv")));
}

TEST_F(CliTest, BenchReportIsByteIdentical) {
  for (const char* o : {"a", "b"}) {
    ASSERT_EQ(run_cli({"bench", "--batch", "2", "--length", "32", "--warmup", "0", "--out", path(o)}), kExitOk)
        << err_.str();
  }
  EXPECT_EQ(slurp(path("a/report.json")), slurp(path("b/report.json")));
  const auto report = nlohmann::json::parse(slurp(path("a/report.json")));
  EXPECT_EQ(report.at("methods").size(), 3u);
  EXPECT_TRUE(report.contains("tlp_vs_max"));
  EXPECT_TRUE(fs::exists(path("a/timing.json")));
}

TEST_F(CliTest, GradcheckPasses) {
  EXPECT_EQ(run_cli({"gradcheck", "--seeds", "3", "--seed", "41", "--out", path("g")}), kExitOk) << out_.str();
  const std::string csv = slurp(path("g/gradcheck.csv"));
  EXPECT_EQ(csv.rfind("case,kind,seeds,max_rel_error,tolerance,passed\n", 0), 0u);
  EXPECT_EQ(csv.find(",0\n"), std::string::npos);
  EXPECT_EQ(run_cli({"gradcheck", "--case", "conv1d", "--case", "tlp_forward_loss"}), kExitOk) << out_.str();
}
