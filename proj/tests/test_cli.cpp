#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "json.hpp"
#include "pdial/persistence.hpp"
#include "test_support.hpp"

using pdial::read_text_file;
using pdial::testing::fixture;
using pdial::testing::TempDir;

namespace {

int run(const std::string& args, const TempDir& dir) {
  const std::string cmd = std::string("\"") + PDIAL_CLI_PATH + "\" " + args + " > \"" +
                          dir.file("stdout.txt") + "\" 2> \"" + dir.file("stderr.txt") + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::string& s) { return "\"" + s + "\""; }

struct Pipeline {
  TempDir dir;

  std::string train_args(const std::string& out) const {
    return "--config " + q(fixture("config.json")) + " train --data " + q(fixture("train.jsonl")) +
           " --matrix " + q(fixture("sim.json")) + " --out " + q(dir.file(out)) + " --pca-out " +
           q(dir.file(out + ".pca.json"));
  }
};

}  // namespace

TEST(Cli, TrainEvalOptimizePlotPipeline) {
  Pipeline p;
  ASSERT_EQ(run(p.train_args("m.json"), p.dir), 0) << read_text_file(p.dir.file("stderr.txt"));
  ASSERT_EQ(run(p.train_args("m2.json"), p.dir), 0);
  EXPECT_EQ(read_text_file(p.dir.file("m.json")), read_text_file(p.dir.file("m2.json")));
  EXPECT_EQ(read_text_file(p.dir.file("m.json.pca.json")), read_text_file(p.dir.file("m2.json.pca.json")));
  EXPECT_TRUE(std::filesystem::exists(p.dir.file("m.log.json")));

  const std::string eval = "eval --dim 64 --model " + q(p.dir.file("m.json")) + " --train " +
                           q(fixture("train.jsonl")) + " --test " + q(fixture("test.jsonl")) +
                           " --out " + q(p.dir.file("r.json"));
  ASSERT_EQ(run(eval, p.dir), 0) << read_text_file(p.dir.file("stderr.txt"));
  EXPECT_NE(read_text_file(p.dir.file("stdout.txt")).find("pro-madrid (Test)"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(p.dir.file("r.txt")));
  const auto report = nlohmann::json::parse(read_text_file(p.dir.file("r.json")));
  EXPECT_EQ(report["std_kind"], "population");

  const std::string opt = "optimize --model " + q(p.dir.file("m.json")) + " --pca " +
                          q(p.dir.file("m.json.pca.json")) + " --prompts " + q(fixture("prompts.json")) +
                          " --mock-table " + q(fixture("mock_table.json")) +
                          " --target-cluster pro-barca --data " + q(fixture("train.jsonl"));
  ASSERT_EQ(run(opt + " --out " + q(p.dir.file("t1.jsonl")), p.dir), 0)
      << read_text_file(p.dir.file("stderr.txt"));
  ASSERT_EQ(run(opt + " --out " + q(p.dir.file("t2.jsonl")), p.dir), 0);
  EXPECT_EQ(read_text_file(p.dir.file("t1.jsonl")), read_text_file(p.dir.file("t2.jsonl")));
  const auto trace = pdial::load_trace(p.dir.file("t1.jsonl"));
  EXPECT_EQ(trace.summary.mode, "gcd");
  EXPECT_EQ(trace.trace.best_evaluation().assignment.base_index, 2u);

  const std::string plot = "plot --pca " + q(p.dir.file("m.json.pca.json")) + " --model " +
                           q(p.dir.file("m.json")) + " --data " + q(fixture("train.jsonl")) +
                           " --trace " + q(p.dir.file("t1.jsonl")) + " --title demo";
  ASSERT_EQ(run(plot + " --out " + q(p.dir.file("a.svg")), p.dir), 0)
      << read_text_file(p.dir.file("stderr.txt"));
  ASSERT_EQ(run(plot + " --out " + q(p.dir.file("b.svg")), p.dir), 0);
  EXPECT_EQ(read_text_file(p.dir.file("a.svg")), read_text_file(p.dir.file("b.svg")));
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(run("", dir), 2);
  EXPECT_EQ(run("frobnicate", dir), 2);
  EXPECT_EQ(run("train --data " + q(fixture("train.jsonl")), dir), 2);
  EXPECT_EQ(run("optimize --mode sideways", dir), 2);
  EXPECT_EQ(run("train --data /nonexistent.jsonl --matrix " + q(fixture("sim.json")) + " --out " +
                    q(dir.file("m.json")),
                dir),
            2);
}

TEST(Cli, BruteForceGuardExitsTwoWithoutCallingTheLlm) {
  Pipeline p;
  ASSERT_EQ(run(p.train_args("m.json"), p.dir), 0);
  nlohmann::json spec = {{"base_phrases", {"a", "b"}},
                         {"slots", nlohmann::json::array()}};
  for (int i = 0; i < 4; ++i) {
    spec["slots"].push_back({"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"});
  }
  pdial::write_text_file(p.dir.file("big.json"), spec.dump());
  // An unreachable HTTP LLM: any call would surface as a backend error (exit 3).
  const std::string opt = "optimize --mode brute --model " + q(p.dir.file("m.json")) + " --pca " +
                          q(p.dir.file("m.json.pca.json")) + " --prompts " + q(p.dir.file("big.json")) +
                          " --target-x 0 --target-y 0 --llm-url http://127.0.0.1:9/v1/chat" +
                          " --llm-model none --out " + q(p.dir.file("t.jsonl"));
  EXPECT_EQ(run(opt, p.dir), 2);
  EXPECT_NE(read_text_file(p.dir.file("stderr.txt")).find("guard"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(p.dir.file("t.jsonl")));
}

TEST(Cli, MismatchedDimensionIsConfigError) {
  Pipeline p;
  ASSERT_EQ(run(p.train_args("m.json"), p.dir), 0);
  const std::string eval = "eval --dim 32 --model " + q(p.dir.file("m.json")) + " --train " +
                           q(fixture("train.jsonl")) + " --test " + q(fixture("test.jsonl")) +
                           " --out " + q(p.dir.file("r.json"));
  EXPECT_EQ(run(eval, p.dir), 2);
}
