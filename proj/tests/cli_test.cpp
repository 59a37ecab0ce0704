// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the mugcat binary as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mugcat/codec.hpp"
#include "mugcat/png.hpp"

namespace {

namespace fs = std::filesystem;
using mugcat::Json;

struct Result {
  int code = -1;
  std::string out;
};

Result mugcat_cli(const std::string& args) {
  const std::string cmd = std::string(MUGCAT_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fixture(const std::string& name) { return std::string(MUGCAT_FIXTURE_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("mugcat-cli-" + std::to_string(::getpid()) + "-" + std::to_string(next_++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string file(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name, std::ios::binary) << content;
    return (path_ / name).string();
  }

 private:
  static inline int next_ = 0;
  fs::path path_;
};

void write_png(const fs::path& path, int seed) {
  mugcat::RgbImage img{32, 32, std::vector<std::uint8_t>(32 * 32 * 3)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>((i * 7 + seed * 31) % 251);
  const auto bytes = mugcat::png::encode(img);
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(Cli, GoldenRunIsByteIdenticalAndFast) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = mugcat_cli("run --input " + fixture("book_read.mclip") + " --config " + fixture("book_read.conf") +
                            " --json --redact-timings");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, slurp(fixture("book_read.golden.json")));
  EXPECT_LT(seconds, 5.0);
}

TEST(Cli, GoldenTurnContent) {
  const Json turn = Json::parse(slurp(fixture("book_read.golden.json")));
  EXPECT_EQ(turn["selection"]["selected_index"], 0);
  EXPECT_EQ(turn["selection"]["selected_caption"], "a photo of book read");
  EXPECT_DOUBLE_EQ(turn["selection"]["scores"][0].get<double>(), 0.6324555320336759);
  EXPECT_DOUBLE_EQ(turn["selection"]["scores"][1].get<double>(), 0.5345224838248487);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(mugcat_cli("run --no-such-flag").code, 2);
  EXPECT_EQ(mugcat_cli("frobnicate").code, 2);
  EXPECT_EQ(mugcat_cli("").code, 2);
  EXPECT_EQ(mugcat_cli("bench render --fixture table9").code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
  EXPECT_EQ(mugcat_cli("run --input /nonexistent/clip.mclip").code, 1);
  TempDir t;
  EXPECT_EQ(mugcat_cli("run --input " + t.file("bad.mclip", "not a clip")).code, 1);
}

TEST(Cli, FidOfIdenticalDirectoriesIsZero) {
  TempDir t;
  for (int i = 0; i < 3; ++i) write_png(t.path() / ("img" + std::to_string(i) + ".png"), i);
  const auto r = mugcat_cli("bench fid --real " + t.path().string() + " --generated " + t.path().string());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.0\n");
  const auto j = mugcat_cli("bench fid --real " + t.path().string() + " --generated " + t.path().string() + " --json");
  EXPECT_EQ(Json::parse(j.out)["fid"], 0.0);
}

TEST(Cli, Accuracy) {
  TempDir t;
  const auto preds = t.file("preds.txt", "a b c\nx a\nc\n");
  const auto labels = t.file("labels.txt", "a\na\nb\n");
  const auto r = mugcat_cli("bench accuracy --predictions " + preds + " --labels " + labels + " --k 2 --json");
  EXPECT_EQ(r.code, 0);
  const Json j = Json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 2.0 / 3);
  EXPECT_EQ(j["samples"], 3);
  const auto short_labels = t.file("short.txt", "a\n");
  EXPECT_EQ(mugcat_cli("bench accuracy --predictions " + preds + " --labels " + short_labels).code, 1);
}

TEST(Cli, RenderRecordedTables) {
  const auto t1 = mugcat_cli("bench render --fixture table1");
  EXPECT_EQ(t1.code, 0);
  for (const char* s : {"46.8", "1429", "95"}) EXPECT_NE(t1.out.find(s), std::string::npos) << s;
  const auto t2 = mugcat_cli("bench render --fixture table2 --format csv");
  EXPECT_EQ(t2.code, 0);
  EXPECT_NE(t2.out.find("20,33.51,14.97,"), std::string::npos);
}

TEST(Cli, FpsAndSweepEmitJson) {
  const auto fps = mugcat_cli("bench fps --synthetic-clips 4 --clip-frames 16 --recognize-latency-ms 10 "
                              "--load-latency-ms 50 --json");
  ASSERT_EQ(fps.code, 0);
  const Json run = Json::parse(fps.out)["run"];
  EXPECT_EQ(run["frames"], 64);
  EXPECT_GE(run["infer_only"]["fps"].get<double>(), run["infer_and_load"]["fps"].get<double>());

  const auto sweep = mugcat_cli("bench sweep --steps 10 20 --k 2 --width 384 --height 384 --json");
  ASSERT_EQ(sweep.code, 0);
  const Json rows = Json::parse(sweep.out)["rows"];
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["steps"], 20);
  EXPECT_EQ(rows[0]["fid"], 0.0);
}

TEST(Cli, ConformanceAgainstStubsPasses) {
  const auto r = mugcat_cli("conformance");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.find("[FAIL]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("[PASS] recognize: handshake"), std::string::npos) << r.out;
}

}  // namespace
