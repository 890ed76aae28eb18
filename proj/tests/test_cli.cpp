#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "azarnet/dataset.hpp"
#include "azarnet/dsp.hpp"
#include "azarnet/model.hpp"
#include "test_util.hpp"

using namespace azarnet;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
};

CliResult run(const std::string& args) {
  const std::string cmd = std::string(AZARNET_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
  EXPECT_EQ(run("synth").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, ParamsTable) {
  const CliResult r = run("params");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("106043"), std::string::npos);
  EXPECT_NE(r.out.find("17400"), std::string::npos);
  EXPECT_NE(r.out.find("45600"), std::string::npos);
  EXPECT_EQ(run("params --filters 8 8").code, 2);
}

TEST(Cli, Gradcheck) {
  const CliResult r = run("gradcheck --seed 3");
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* name : {"conv2d", "maxpool", "batchnorm", "dropout", "leaky_relu", "gru", "dense"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  }
}

TEST(Cli, SynthWritesDatasetDeterministically) {
  testutil::TempDir a, b;
  const CliResult ra = run("synth --out " + a.path().string() + " --per-class 5 --seed 4");
  ASSERT_EQ(ra.code, 0) << ra.out;
  EXPECT_NE(ra.out.find("manifest.jsonl"), std::string::npos);
  EXPECT_EQ(count_files(a.path(), ".wav"), 35u);
  ASSERT_EQ(run("synth --out " + b.path().string() + " --per-class 5 --seed 4").code, 0);
  for (const auto& e : fs::directory_iterator(a.path())) {
    EXPECT_EQ(testutil::read_bytes(e.path().string()), testutil::read_bytes((b.path() / e.path().filename()).string()));
  }
  EXPECT_EQ(run("synth --out /proc/azarnet_nope --per-class 1").code, 1);
}

TEST(Cli, PreprocessCachesSkipsAndReportsCorruptFiles) {
  testutil::TempDir dir;
  const std::string data = (dir.path() / "data").string(), cache = (dir.path() / "cache").string();
  ASSERT_EQ(run("synth --out " + data + " --per-class 5 --seed 1").code, 0);
  const std::string manifest = data + "/manifest.jsonl";

  CliResult r = run("preprocess --manifest " + manifest + " --cache " + cache);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_files(cache, ".spec"), 35u);
  for (const auto& e : fs::directory_iterator(cache)) {
    EXPECT_EQ(load_spectrogram(e.path().string()).values.shape(), (Shape{256, 256}));
  }

  std::vector<fs::file_time_type> stamps;
  for (const auto& e : fs::directory_iterator(cache)) stamps.push_back(fs::last_write_time(e.path()));
  r = run("preprocess --manifest " + manifest + " --cache " + cache);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("preprocessed 0"), std::string::npos) << r.out;
  std::size_t i = 0;
  for (const auto& e : fs::directory_iterator(cache)) EXPECT_EQ(fs::last_write_time(e.path()), stamps[i++]);

  const std::string cache2 = (dir.path() / "cache2").string();
  const auto recs = load_manifest(manifest);
  const std::string victim = resolve_record_path(manifest, recs[3]);
  testutil::write_bytes(victim, "RIFF\x10\0\0\0WAVEjunk");
  r = run("preprocess --manifest " + manifest + " --cache " + cache2);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find(fs::path(victim).filename().string()), std::string::npos) << r.out;
  EXPECT_EQ(count_files(cache2, ".spec"), 34u);
}

TEST(Cli, TrainEvalPredictSmallModel) {
  testutil::TempDir dir;
  const std::string data = (dir.path() / "data").string(), cache = (dir.path() / "cache").string();
  ASSERT_EQ(run("synth --out " + data + " --per-class 2 --seed 2").code, 0);
  const std::string manifest = data + "/manifest.jsonl";
  ASSERT_EQ(run("preprocess --manifest " + manifest + " --cache " + cache).code, 0);

  const std::string model = (dir.path() / "m.aznet").string();
  const std::string common = " --manifest " + manifest + " --cache " + cache;
  CliResult r = run("train" + common + " --out " + model + " --seed 5 --epochs 1 --split 0.5");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(model));
  EXPECT_TRUE(fs::exists(model + ".history.csv"));
  EXPECT_NE(r.out.find("Macro F1"), std::string::npos) << r.out;

  const std::string csv1 = (dir.path() / "e1.csv").string(), csv2 = (dir.path() / "e2.csv").string();
  r = run("eval --model " + model + common + " --csv " + csv1);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Precision"), std::string::npos);
  ASSERT_EQ(run("eval --model " + model + common + " --csv " + csv2).code, 0);
  EXPECT_EQ(testutil::read_bytes(csv1), testutil::read_bytes(csv2));

  const auto recs = load_manifest(manifest);
  r = run("predict --model " + model + " --audio " + resolve_record_path(manifest, recs[0]));
  ASSERT_EQ(r.code, 0) << r.out;
  double sum = 0.0;
  for (auto name : kClassNames) {
    const auto pos = r.out.find(std::string(name) + " ");
    ASSERT_NE(pos, std::string::npos) << name;
    sum += std::stod(r.out.substr(pos + name.size()));
  }
  EXPECT_NEAR(sum, 1.0, 1e-5);
  EXPECT_NE(r.out.find("prediction:"), std::string::npos);

  EXPECT_EQ(run("eval --model " + (dir.path() / "none.aznet").string() + common).code, 1);
  EXPECT_EQ(run("eval --model " + model + " --manifest " + manifest + " --cache " + (dir.path() / "nocache").string()).code, 1);
  EXPECT_EQ(run("predict --model " + (dir.path() / "none.aznet").string() + " --audio x.wav").code, 1);
}
