#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <thread>

#include "pfdet/concept_bank.hpp"
#include "pfdet/data.hpp"
#include "pfdet/llm_http.hpp"
#include "pfdet/metrics.hpp"
#include "pfdet/strings.hpp"
#include "pfdet/text_pipeline.hpp"
#include "pfdet/ttp.hpp"
#include "test_util.hpp"

namespace pfdet {
namespace {

using testutil::CliResult;
using testutil::run_cli;
using testutil::TempDir;

TEST(CliErrors, MissingCommandAndUnknownCommand) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli("", dir.path()).exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate", dir.path()).exit_code, 2);
}

TEST(CliErrors, InvalidThresholdPairNamesTheInvariant) {
  TempDir dir("cli");
  const CliResult result = run_cli("eval --ttp.t_real 0.4 --ttp.t_fake 0.4", dir.path());
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.output.find("ttp.t_real + ttp.t_fake"), std::string::npos);
}

TEST(CliErrors, UnknownKeyIsConfigError) {
  TempDir dir("cli");
  const CliResult result = run_cli("train --no.such.key 1", dir.path());
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.output.find("no.such.key"), std::string::npos);
}

TEST(CliErrors, MissingInputArtifactIsExitThree) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli("train", dir.path()).exit_code, 3);       // no manifest
  EXPECT_EQ(run_cli("eval", dir.path()).exit_code, 3);        // no artifacts at all
  EXPECT_EQ(run_cli("build-cache --paths.data_root missing", dir.path()).exit_code, 3);
  EXPECT_EQ(run_cli("build-prompts --bank.path missing.txt", dir.path()).exit_code, 3);
}

TEST(CliBuildPrompts, WritesLoadableBankWithEcho) {
  TempDir dir("cli");
  const CliResult result = run_cli("build-prompts --bank.out bank.txt", dir.path());
  ASSERT_EQ(result.exit_code, 0) << result.output;
  const ConceptBank bank = load_bank(dir.path() / "bank.txt");
  EXPECT_EQ(bank.fake_concepts.size(), 5u);
  const std::string text = testutil::slurp(dir.path() / "bank.txt");
  EXPECT_NE(text.find("# classifier.tau = 0.01"), std::string::npos);

  // rewriting is byte-identical (idempotent command)
  const std::string once = text;
  ASSERT_EQ(run_cli("build-prompts --bank.out bank.txt", dir.path()).exit_code, 0);
  EXPECT_EQ(testutil::slurp(dir.path() / "bank.txt"), once);
}

// One small end-to-end flow shared by the pipeline tests below.
class CliFlow : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cliflow");
    const std::filesystem::path& p = dir_->path();
    {
      std::ofstream cfg(p / "run.cfg");
      cfg << "encoder.dim = 8\n"
          << "encoder.vocab = 256\n"
          << "synth.train_per_class = 24\n"
          << "synth.test_per_class = 12\n"
          << "synth.image_size = 8\n"
          << "train.epochs = 3\n"
          << "train.batch_size = 16\n"
          << "ttp.steps = 2\n"
          << "ttp.batch_size = 16\n"
          << "ttp.t_real = 0.6\n"
          << "ttp.t_fake = 0.5\n";
    }
    auto run = [&](const std::string& args) {
      const CliResult r = run_cli(args, p);
      ASSERT_EQ(r.exit_code, 0) << args << "\n" << r.output;
    };
    run("synth --config run.cfg --synth.out data");
    run("build-cache --config run.cfg --paths.data_root data/train "
        "--paths.manifest train.tsv --paths.cache train.pfemb");
    run("build-cache --config run.cfg --paths.data_root data/test "
        "--paths.manifest test.tsv --paths.cache test.pfemb");
    run("train --config run.cfg --paths.manifest train.tsv --paths.cache train.pfemb");
    run("ttp --config run.cfg --paths.manifest test.tsv --paths.cache test.pfemb");
    run("eval --config run.cfg --paths.manifest test.tsv --paths.cache test.pfemb "
        "--paths.report report.txt");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static const std::filesystem::path& path() { return dir_->path(); }

  static TempDir* dir_;
};

TempDir* CliFlow::dir_ = nullptr;

TEST_F(CliFlow, ArtifactsExistWithExpectedShapes) {
  EXPECT_TRUE(std::filesystem::exists(path() / "train.pfemb"));
  EXPECT_TRUE(std::filesystem::exists(path() / "context.pfctx"));
  EXPECT_TRUE(std::filesystem::exists(path() / "context_ttp.pfctx"));
  EXPECT_TRUE(std::filesystem::exists(path() / "pseudo.tsv"));

  const DatasetManifest train = load_manifest(path() / "train.tsv");
  EXPECT_EQ(train.entries.size(), 48u);
  const DatasetManifest test = load_manifest(path() / "test.tsv");
  EXPECT_EQ(test.entries.size(), 48u);

  const PromptContext ctx = load_context(path() / "context.pfctx");
  EXPECT_EQ(ctx.size(), 1u);
  EXPECT_EQ(ctx.width(), 8u);
}

TEST_F(CliFlow, ReportHasPerSubsetSectionsAndConfigEcho) {
  const auto values = load_report_values(path() / "report.txt");
  EXPECT_EQ(values.at("subsets"), "mild,strong");
  EXPECT_NE(values.count("subset.mild.auc"), 0u);
  EXPECT_NE(values.count("subset.strong.oa"), 0u);
  EXPECT_NE(values.count("macro.auc"), 0u);
  EXPECT_EQ(values.at("config.encoder.dim"), "8");
  EXPECT_EQ(values.at("config.paths.report"), "report.txt");
  const double macro_oa = parse_double(values.at("macro.oa"), "macro.oa");
  EXPECT_GE(macro_oa, 0.0);
  EXPECT_LE(macro_oa, 1.0);
}

TEST_F(CliFlow, TrainLogEchoesConfigAndStreamsLossRows) {
  const std::string log = testutil::slurp(path() / "train.log");
  EXPECT_NE(log.find("# train.epochs = 3"), std::string::npos);
  EXPECT_NE(log.find("# columns: epoch\tstep\tloss"), std::string::npos);
  std::size_t rows = 0;
  for (const std::string& line : split(log, '\n'))
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_EQ(rows, 3u * 3u);  // 48 samples, batch 16 -> 3 steps x 3 epochs
}

TEST_F(CliFlow, PseudoManifestIsAuditable) {
  const auto records = load_pseudo_manifest(path() / "pseudo.tsv");
  const DatasetManifest test = load_manifest(path() / "test.tsv");
  std::map<std::string, int> truth;
  for (const auto& e : test.entries) truth[e.sample_id] = e.label;
  for (const auto& rec : records) {
    EXPECT_TRUE(rec.pseudo_label == 0 || rec.pseudo_label == 1);
    EXPECT_GT(rec.confidence, 0.5);
    EXPECT_NE(truth.count(rec.sample_id), 0u);
  }
  const std::string text = testutil::slurp(path() / "pseudo.tsv");
  EXPECT_NE(text.find("# ttp.t_real = " + format_g17(0.6)), std::string::npos);
}

TEST_F(CliFlow, EvalIsIdempotent) {
  const std::string first = testutil::slurp(path() / "report.txt");
  const CliResult r = run_cli(
      "eval --config run.cfg --paths.manifest test.tsv --paths.cache test.pfemb "
      "--paths.report report.txt",
      path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(testutil::slurp(path() / "report.txt"), first);
}

TEST_F(CliFlow, CacheDigestMismatchIsIntegrityFailure) {
  // evaluating the test cache against the train manifest must be refused
  const CliResult r = run_cli(
      "eval --config run.cfg --paths.manifest train.tsv --paths.cache test.pfemb", path());
  EXPECT_EQ(r.exit_code, 4);
  EXPECT_NE(r.output.find("digest mismatch"), std::string::npos);
}

TEST_F(CliFlow, SweepEmitsOneRowPerGridValue) {
  const CliResult r = run_cli(
      "sweep --config run.cfg --paths.manifest test.tsv --paths.cache test.pfemb "
      "--sweep.param ttp.top_k --sweep.values 32,64,128,256",
      path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const std::string table = testutil::slurp(path() / "sweep.txt");
  std::vector<std::string> rows;
  for (const std::string& line : split(table, '\n'))
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_TRUE(rows[0].starts_with("32\t"));
  EXPECT_TRUE(rows[3].starts_with("256\t"));
  for (const std::string& row : rows) {
    const auto cols = split(row, '\t');
    ASSERT_EQ(cols.size(), 5u);
    const double auc_value = parse_double(cols[1], "auc");
    EXPECT_GE(auc_value, 0.0);
    EXPECT_LE(auc_value, 1.0);
  }
}

TEST_F(CliFlow, SweepRejectsGridThatViolatesInvariants) {
  const CliResult r = run_cli(
      "sweep --config run.cfg --paths.manifest test.tsv --paths.cache test.pfemb "
      "--sweep.param ttp.t_real --sweep.values 0.9,0.2",
      path());
  EXPECT_EQ(r.exit_code, 2);
}

TEST(LlmHttp, RetrievesFromLocalServerAndMergesIntoBank) {
  httplib::Server server;
  server.Post("/complete", [](const httplib::Request& req, httplib::Response& res) {
    EXPECT_EQ(req.body, std::string(kDefaultQuery));
    res.set_content("waxy skin, over-smooth texture\nmismatched reflections", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  TempDir dir("llm");
  const CliResult r = run_cli("build-prompts --bank.retrieve true --llm.endpoint http://127.0.0.1:" +
                                  std::to_string(port) + "/complete",
                              dir.path());
  server.stop();
  thread.join();
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const ConceptBank bank = load_bank(dir.path() / "bank.txt");
  EXPECT_EQ(bank.fake_concepts.size(), 8u);
  EXPECT_EQ(bank.fake_concepts[5].text, "waxy skin");
  EXPECT_EQ(bank.fake_concepts[7].text, "mismatched reflections");
}

TEST(LlmHttp, UnreachableEndpointIsRetrievalError) {
  HttpLlmClient client("http://127.0.0.1:9/complete", 1);  // port 9: discard, nothing listens
  try {
    client.complete("hello");
    FAIL() << "expected retrieval error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Retrieval);
  }
}

}  // namespace
}  // namespace pfdet
