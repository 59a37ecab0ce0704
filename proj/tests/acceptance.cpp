// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one [PASS] or [FAIL] line per criterion and exits
// non-zero if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mugcat/bench.hpp"
#include "mugcat/conformance.hpp"
#include "mugcat/pipeline.hpp"
#include "mugcat/selection.hpp"
#include "mugcat/stubs.hpp"
#include "oracles.hpp"
#include "roundtrip.hpp"
#include "support.hpp"

namespace {

using namespace mugcat;
using namespace std::chrono_literals;
namespace ts = testing_support;

// A criterion body returns an empty string on success, otherwise the reason.
using Criterion = std::function<std::string()>;

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

CandidatePair candidate(std::size_t i, std::vector<double> e) {
  const std::string id = "c-" + std::to_string(i);
  return CandidatePair(GeneratedImage(id, "p", static_cast<int>(i), Bytes{1}), Caption(id, "caption " + id),
                       Embedding(std::move(e)));
}

std::vector<double> nonzero_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(dim);
  do {
    for (auto& x : v) x = g(rng);
  } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
  return v;
}

std::string selection_oracle() {
  std::mt19937_64 rng(2024);
  int ties = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 1 + rng() % 16;
    const std::size_t dim = 1 + rng() % 64;
    std::vector<std::vector<double>> raw;
    for (std::size_t i = 0; i < k; ++i) raw.push_back(nonzero_vector(dim, rng));
    const auto query = nonzero_vector(dim, rng);
    // Every fourth case copies the best candidate elsewhere to force an exact
    // tie at the top.
    if (t % 4 == 0 && k > 1) {
      const std::size_t src = oracle::select(raw, query).winners.front();
      std::size_t dst = rng() % k;
      if (dst == src) dst = (dst + 1) % k;
      raw[dst] = raw[src];
    }
    std::vector<CandidatePair> c;
    for (std::size_t i = 0; i < k; ++i) c.push_back(candidate(i, raw[i]));
    const auto got = selection::select(c, Embedding(query));
    const auto want = oracle::select(raw, query);
    bool exact_dupes = true;
    for (auto w : want.winners) exact_dupes = exact_dupes && raw[w] == raw[want.winners[0]];
    if (want.winners.size() > 1 && exact_dupes) {
      ++ties;
      if (got.selected_index() != want.winners[0]) return "case " + std::to_string(t) + ": tie not broken to lowest index";
    } else if (std::find(want.winners.begin(), want.winners.end(), got.selected_index()) == want.winners.end()) {
      return "case " + std::to_string(t) + ": selected " + std::to_string(got.selected_index());
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (std::fabs(got.scores()[i] - static_cast<double>(want.scores[i])) > 1e-12) {
        return "case " + std::to_string(t) + ": score " + std::to_string(i) + " differs";
      }
    }
  }
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 2 + rng() % 15;
    const std::size_t dim = 1 + rng() % 64;
    std::vector<std::vector<double>> raw;
    for (std::size_t i = 0; i < k; ++i) raw.push_back(nonzero_vector(dim, rng));
    const auto query = nonzero_vector(dim, rng);
    std::vector<CandidatePair> plain, scaled;
    for (std::size_t i = 0; i < k; ++i) {
      plain.push_back(candidate(i, raw[i]));
      auto v = raw[i];
      const double f = std::ldexp(1.0, static_cast<int>(rng() % 21) - 10) * (1 + (rng() % 7));
      for (auto& x : v) x *= f;
      scaled.push_back(candidate(i, v));
    }
    auto q = query;
    for (auto& x : q) x *= 3.5;
    if (selection::select(plain, Embedding(query)).selected_index() !=
        selection::select(scaled, Embedding(q)).selected_index()) {
      return "scaling case " + std::to_string(t) + " changed the selection";
    }
  }
  if (ties < 200) return "only " + std::to_string(ties) + " tie cases exercised";
  return {};
}

std::string cosine_analytic() {
  const std::vector<double> x{1, 0}, y{0, 1}, d{1, 1};
  if (std::fabs(selection::cosine(x, x) - 1.0) > 1e-12) return "cos(x, x) != 1";
  if (std::fabs(selection::cosine(x, y)) > 1e-12) return "cos(x, y) != 0";
  if (std::fabs(selection::cosine(d, x) - 1.0 / std::sqrt(2.0)) > 1e-12) return "cos(d, x) != 1/sqrt(2)";
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const auto u = nonzero_vector(1 + rng() % 64, rng);
    auto v = u;
    const double f = (t % 2 ? -1.0 : 1.0) * std::ldexp(1.0, static_cast<int>(rng() % 40) - 20) * 1.37;
    for (auto& a : v) a *= f;
    const double s = selection::cosine(u, v);
    if (s < -1.0 || s > 1.0) return "score " + fmt("%.17g", s) + " escapes [-1, 1]";
  }
  return {};
}

bench::GaussianStats stats(const oracle::Vec& mu, const oracle::Mat& cov) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(mu.size()));
  Eigen::MatrixXd c(m.size(), m.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    m(static_cast<Eigen::Index>(i)) = mu[i];
    for (std::size_t j = 0; j < mu.size(); ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov[i][j];
  }
  return bench::GaussianStats(m, c, 10);
}

std::string fid_properties() {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  auto vec = [&](std::size_t d) {
    oracle::Vec v(d);
    for (auto& x : v) x = g(rng);
    return v;
  };
  for (std::size_t d = 1; d <= 8; ++d) {
    const auto s = stats(vec(d), oracle::random_psd(d, rng));
    if (std::fabs(bench::fid(s, s)) > 1e-8) return "identical stats at d=" + std::to_string(d) + " give nonzero";
  }
  if (std::fabs(bench::fid(stats({0}, {{1}}), stats({1}, {{1}})) - 1.0) > 1e-9) return "mean shift case != 1";
  if (std::fabs(bench::fid(stats({0}, {{1}}), stats({0}, {{4}})) - 1.0) > 1e-9) return "variance case != 1";
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + rng() % 8;
    const auto ma = vec(d), mb = vec(d);
    const auto ca = oracle::random_psd(d, rng), cb = oracle::random_psd(d, rng);
    const double ab = bench::fid(stats(ma, ca), stats(mb, cb));
    if (std::fabs(ab - bench::fid(stats(mb, cb), stats(ma, ca))) > 1e-6) return "asymmetric at case " + std::to_string(t);
    worst = std::max(worst, std::fabs(ab - oracle::fid(ma, ca, mb, cb)));

    // Rotate both distributions by the same orthogonal matrix.
    Eigen::MatrixXd r(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = g(rng);
    }
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(r).householderQ();
    const auto sa = stats(ma, ca), sb = stats(mb, cb);
    const bench::GaussianStats ra(q * sa.mean(), q * sa.cov() * q.transpose(), 10);
    const bench::GaussianStats rb(q * sb.mean(), q * sb.cov() * q.transpose(), 10);
    if (std::fabs(ab - bench::fid(ra, rb)) > 1e-6) return "rotation changes FID at case " + std::to_string(t);
  }
  if (worst > 1e-6) return "max deviation from alternate-route oracle " + fmt("%.3g", worst);
  return {};
}

std::string segmentation_count() {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t w = 1 + rng() % 48;
    const std::size_t s = 1 + rng() % w;
    const std::size_t n = w + rng() % 160;
    std::vector<Frame> frames;
    for (std::size_t i = 0; i < n; ++i) frames.push_back(ts::solid_frame(i, 16, 0));
    const auto clips = ingest::segment(frames, w, s, "s", 25);
    if (clips.size() != (n - w) / s + 1) {
      return "n=" + std::to_string(n) + " w=" + std::to_string(w) + " s=" + std::to_string(s) + " gave " +
             std::to_string(clips.size());
    }
    for (std::size_t j = 1; j < clips.size(); ++j) {
      const auto prev_end = clips[j - 1].frames().back().index();
      const auto start = clips[j].frames().front().index();
      const std::size_t overlap = prev_end >= start ? prev_end - start + 1 : 0;
      if (overlap != w - s) return "overlap " + std::to_string(overlap) + " != " + std::to_string(w - s);
    }
  }
  return {};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string golden_run() {
  const std::string dir = MUGCAT_FIXTURE_DIR;
  const std::string cmd = std::string(MUGCAT_CLI) + " run --input " + dir + "/book_read.mclip --config " + dir +
                          "/book_read.conf --json --redact-timings";
  const auto start = std::chrono::steady_clock::now();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return "cannot launch CLI";
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = ::pclose(pipe);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return "CLI exited abnormally";
  if (out != slurp(dir + "/book_read.golden.json")) return "output differs from golden";
  if (secs >= 5.0) return fmt("took %.2f s", secs);
  return {};
}

std::string fps_benchmark() {
  stubs::StubOptions opts;
  opts.recognize_latency = 10ms;
  opts.load_latency = 500ms;
  stubs::StubSet stubs(opts);
  std::vector<bench::ClipLoader> loaders;
  for (std::uint64_t c = 0; c < 20; ++c) {
    loaders.push_back([c] {
      std::vector<Frame> frames;
      for (std::uint64_t i = 0; i < 16; ++i) frames.push_back(ts::solid_frame(c * 16 + i, 16, 1));
      return Clip(make_clip_id("bench", c * 16), std::move(frames), 25.0, "bench");
    });
  }
  const auto run = bench::measure_fps(loaders, stubs.backends().at(Stage::kRecognize));
  const double infer = run.infer_only().fps;
  const double load = run.infer_and_load().fps;
  if (infer < load) return "infer-only below infer-and-load";
  if (std::fabs(infer - 1600.0) > 0.15 * 1600.0) return fmt("infer-only %.1f fps outside 1600 +/- 15%%", infer);
  const auto table = bench::render(bench::recorded_recognition_table(), bench::Format::kText);
  for (const char* s : {"46.8", "1429", "95"}) {
    if (table.find(s) == std::string::npos) return std::string("table lacks ") + s;
  }
  return {};
}

std::string sampling_sweep() {
  stubs::StubOptions opts;
  opts.synth_latency_per_step = 8ms;
  stubs::StubSet stubs(opts);
  bench::SweepSpec spec;
  spec.steps = {15, 20, 25, 30, 35, 40, 45, 50};
  spec.resolution = {384, 384};
  spec.k = 2;
  const auto report = bench::run_sweep(spec, stubs.backends());
  if (report.rows.size() != 8) return "expected 8 rows";
  for (const auto& row : report.rows) {
    if (row.failed()) return "row " + std::to_string(row.steps) + " failed: " + *row.error;
  }
  // Rows run from most to fewest steps, so seconds must fall strictly.
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    if (!(*report.rows[i].seconds_per_batch < *report.rows[i - 1].seconds_per_batch)) {
      return "seconds not strictly increasing at " + std::to_string(report.rows[i - 1].steps) + " steps";
    }
  }
  if (report.rows.front().steps != 50 || *report.rows.front().fid != 0.0) return "reference row FID is not 0";
  const auto text = bench::render(bench::recorded_sweep_table(), bench::Format::kText);
  const char* triples[] = {"50             | 0         | 35.50", "45             | 33.43     | 32.05",
                           "40             | 30.44     | 28.66", "35             | 31.70     | 25.24",
                           "30             | 31.55     | 21.79", "25             | 33.19     | 18.39",
                           "20             | 33.51     | 14.97", "15             | 40.33     | 12.25"};
  for (const char* t : triples) {
    if (text.find(t) == std::string::npos) return std::string("rendered table lacks ") + t;
  }
  return {};
}

std::string protocol_conformance() {
  int checks = 0;
  if (auto r = roundtrip::run(4242, 200, &checks); !r.empty()) return "round-trip: " + r;
  for (Stage s : kAllStages) {
    stubs::StubService svc(s);
    auto t = std::make_shared<protocol::InProcessTransport>(svc.handler(), "stub");
    const auto report = conformance::run(s, t);
    if (!report.passed()) {
      for (const auto& c : report.checks) {
        if (!c.passed) return std::string(to_string(s)) + " conformance: " + c.name + ": " + c.detail;
      }
    }
  }
  ts::ShortBatchBackends short_batch;
  try {
    short_batch.backends.at(Stage::kSynthesize).synthesize(SynthesisRequest("book", 20, {384, 384}, 4, 1));
    return "short batch accepted";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kMalformedResponse) return "short batch gave " + std::string(to_string(e.code()));
  }
  return {};
}

std::string stream_determinism() {
  const auto inputs = ts::hinted_stream();
  const ingest::FrameSource src("s", ingest::SourceMode::kFile, 25);
  stubs::StubSet a, b;
  const auto first = ts::serialize(pipeline::run_stream(inputs, ts::small_config(), a.backends(), src));
  const auto second = ts::serialize(pipeline::run_stream(inputs, ts::small_config(), b.backends(), src));
  if (first != second) return "serialized turns differ between runs";
  if (first.size() != 2 || first[0].rfind("outcome:", 0) == 0) return "unexpected stream outcome";
  for (int c : {1, 2, 3, 5, 8}) {
    ts::CountingBackends counting;
    pipeline::run_turn(1, KeywordSequence({"book"}, {"s:0"}), ts::small_config(8, c), counting.backends);
    if (counting.counter->peak() > c) {
      return "caption concurrency " + std::to_string(counting.counter->peak()) + " exceeds " + std::to_string(c);
    }
  }
  return {};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Criterion>> criteria{
      {"selection matches exhaustive oracle with lowest-index ties and scaling invariance", selection_oracle},
      {"cosine analytic cases and [-1, 1] clamp", cosine_analytic},
      {"FID identity, 1-D cases, symmetry, rotation invariance, alternate-route oracle", fid_properties},
      {"segmentation count and overlap over 1000 random cases", segmentation_count},
      {"golden run is byte-identical and under 5 s", golden_run},
      {"FPS benchmark ordering, 1600 fps target and recorded table", fps_benchmark},
      {"sampling sweep timing, reference FID and recorded table", sampling_sweep},
      {"protocol round-trip, stub conformance and short-batch rejection", protocol_conformance},
      {"stream determinism and bounded caption concurrency", stream_determinism},
  };
  int failed = 0;
  for (const auto& [name, body] : criteria) {
    std::string why;
    try {
      why = body();
    } catch (const std::exception& e) {
      why = std::string("threw: ") + e.what();
    }
    if (why.empty()) {
      std::printf("[PASS] %s\n", name);
    } else {
      std::printf("[FAIL] %s: %s\n", name, why.c_str());
      ++failed;
    }
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
