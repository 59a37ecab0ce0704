// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Evaluation harnesses: top-k accuracy, throughput in two accounting scopes,
// the Frechet distance between Gaussian fits of image features, the
// sampling-steps sweep, and report rendering in text, JSON and CSV.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mugcat/codec.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"
#include "mugcat/ingest.hpp"
#include "mugcat/protocol.hpp"

namespace mugcat::bench {

// ---------------------------------------------------------------------------
// Accuracy

inline double topk_accuracy(std::span<const std::vector<std::string>> predictions, std::span<const std::string> labels,
                            std::size_t k) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                std::to_string(labels.size()) + " labels");
  }
  detail::require(!labels.empty(), ErrorCode::kInvalidValue, "accuracy needs at least one sample");
  detail::require(k >= 1, ErrorCode::kInvalidValue, "k must be at least 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& ranked = predictions[i];
    detail::require(!ranked.empty(), ErrorCode::kInvalidValue, "sample " + std::to_string(i) + " has no predictions");
    const auto end = ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size()));
    if (std::find(ranked.begin(), end, labels[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Throughput

enum class FpsMode { kInferOnly, kInferAndLoad };

constexpr std::string_view to_string(FpsMode m) { return m == FpsMode::kInferOnly ? "infer_only" : "infer_and_load"; }

struct FpsReport {
  FpsMode mode = FpsMode::kInferOnly;
  std::size_t frames = 0;
  double elapsed_s = 0.0;
  double fps = 0.0;
};

inline FpsReport make_fps_report(FpsMode mode, std::size_t frames, double elapsed_s) {
  detail::require(elapsed_s > 0.0, ErrorCode::kInvalidValue, "elapsed time must be positive");
  return {mode, frames, elapsed_s, static_cast<double>(frames) / elapsed_s};
}

/// Both scopes of one run. The load scope contains the inference scope, so
/// infer-only throughput is never lower.
struct FpsRun {
  std::size_t clips = 0;
  std::size_t frames = 0;
  double infer_s = 0.0;
  double total_s = 0.0;

  FpsReport infer_only() const { return make_fps_report(FpsMode::kInferOnly, frames, infer_s); }
  FpsReport infer_and_load() const { return make_fps_report(FpsMode::kInferAndLoad, frames, total_s); }
  FpsReport report(FpsMode mode) const { return mode == FpsMode::kInferOnly ? infer_only() : infer_and_load(); }
};

/// Produces one clip; runs inside the load scope.
using ClipLoader = std::function<Clip()>;

/// Runs every clip through the recognizer one call at a time. The total scope
/// covers a fresh handshake (model load), clip loading and resizing; the
/// inference scope is the sum of the recognizer call times alone.
inline FpsRun measure_fps(std::span<const ClipLoader> clips, protocol::StageClient& recognizer) {
  detail::require(!clips.empty(), ErrorCode::kInvalidValue, "measure_fps needs at least one clip");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto caps = recognizer.handshake(/*refresh=*/true);
  FpsRun run;
  std::chrono::nanoseconds infer{0};
  for (const auto& load : clips) {
    const Clip clip = load();
    const Resolution in = caps.input_resolution.value_or(Resolution{clip.width(), clip.height()});
    const auto result = recognizer.recognize(
        protocol::RecognizeRequest{ingest::resize_for_model(clip, in.width, in.height), 1, std::nullopt});
    infer += result.elapsed;
    run.frames += clip.frames().size();
    ++run.clips;
  }
  run.total_s = std::chrono::duration<double>(Clock::now() - start).count();
  run.infer_s = std::chrono::duration<double>(infer).count();
  return run;
}

// ---------------------------------------------------------------------------
// Frechet distance

/// Mean and covariance of a feature sample. Symmetrized on construction and
/// checked to be positive semi-definite up to rounding.
class GaussianStats {
 public:
  GaussianStats(Eigen::VectorXd mean, Eigen::MatrixXd cov, std::size_t n) : mean_(std::move(mean)), n_(n) {
    if (n < 2) throw Error(ErrorCode::kTooFewSamples, "need at least 2 samples, got " + std::to_string(n));
    detail::require(mean_.size() >= 1, ErrorCode::kInvalidValue, "feature dimension must be at least 1");
    if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
      throw Error(ErrorCode::kDimMismatch, "covariance shape does not match mean dimension");
    }
    cov_ = (cov + cov.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::kEigenFailure, "covariance eigendecomposition failed");
    const double max_ev = es.eigenvalues().maxCoeff();
    detail::require(es.eigenvalues().minCoeff() >= -1e-8 * std::max(1.0, max_ev), ErrorCode::kInvalidValue,
                    "covariance is not positive semi-definite");
  }

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& cov() const noexcept { return cov_; }
  std::size_t n() const noexcept { return n_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  std::size_t n_;
};

/// Rows are samples. Unbiased covariance (divisor n-1).
inline GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
  const auto n = features.rows();
  if (n < 2) throw Error(ErrorCode::kTooFewSamples, "need at least 2 samples, got " + std::to_string(n));
  detail::require(features.cols() >= 1, ErrorCode::kInvalidValue, "feature dimension must be at least 1");
  const Eigen::VectorXd mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return GaussianStats(mean, std::move(cov), static_cast<std::size_t>(n));
}

inline GaussianStats gaussian_stats(std::span<const Embedding> features) {
  if (features.size() < 2) {
    throw Error(ErrorCode::kTooFewSamples, "need at least 2 samples, got " + std::to_string(features.size()));
  }
  const auto d = static_cast<Eigen::Index>(features.front().dim());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), d);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (static_cast<Eigen::Index>(features[i].dim()) != d) {
      throw Error(ErrorCode::kDimMismatch, "feature " + std::to_string(i) + " has dim " +
                                               std::to_string(features[i].dim()) + ", expected " + std::to_string(d));
    }
    for (Eigen::Index j = 0; j < d; ++j) m(static_cast<Eigen::Index>(i), j) = features[i].vector()[j];
  }
  return gaussian_stats(m);
}

namespace internal {

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::kEigenFailure, "symmetric eigendecomposition did not converge");
  return es;
}

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const auto es = eig(m);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace internal

/// ||mu_a - mu_b||^2 + Tr(A + B) - 2 * sum sqrt(eig(A^1/2 B A^1/2)), clamped at 0.
inline double fid(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimMismatch, "dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  }
  const Eigen::MatrixXd root_a = internal::psd_sqrt(a.cov());
  Eigen::MatrixXd s = root_a * b.cov() * root_a;
  s = (s + s.transpose()) / 2.0;
  const auto es = internal::eig(s);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double mean_term = (a.mean() - b.mean()).squaredNorm();
  return std::max(0.0, mean_term + a.cov().trace() + b.cov().trace() - 2.0 * cross);
}

// ---------------------------------------------------------------------------
// Sweep

inline constexpr std::string_view kDefaultSweepPrompt =
    "A beautiful flower garden on a sunny day with a valley background.";

struct SweepRow {
  int steps = 0;
  std::optional<double> fid;
  std::optional<double> seconds_per_batch;
  std::optional<std::string> error;

  bool failed() const noexcept { return error.has_value(); }
};

struct SweepReport {
  Resolution resolution{512, 512};
  int k = 0;
  std::string prompt;
  std::uint64_t seed = 0;
  int reference_steps = 0;
  std::vector<SweepRow> rows;
};

struct SweepSpec {
  std::vector<int> steps{50, 45, 40, 35, 30, 25, 20, 15};
  Resolution resolution{512, 512};
  int k = 8;
  std::string prompt{kDefaultSweepPrompt};
  std::uint64_t seed = 0;
  std::size_t feature_concurrency = 8;
};

/// Synthesizes one batch per steps value (one timed call in flight), extracts
/// image features for every image and scores each batch against the batch
/// with the most steps. Row failures are recorded and the sweep continues.
inline SweepReport run_sweep(const SweepSpec& spec, const protocol::Backends& backends) {
  detail::require(!spec.steps.empty(), ErrorCode::kInvalidValue, "sweep needs at least one steps value");
  detail::require(spec.k >= 2, ErrorCode::kTooFewSamples, "FID needs at least 2 images per batch");
  std::vector<int> steps = spec.steps;
  std::sort(steps.begin(), steps.end(), std::greater<>());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

  SweepReport report{spec.resolution, spec.k, spec.prompt, spec.seed, steps.front(), {}};
  std::optional<GaussianStats> reference;
  for (int s : steps) {
    SweepRow row;
    row.steps = s;
    try {
      const SynthesisRequest request(spec.prompt, s, spec.resolution, spec.k, spec.seed);
      const auto batch = backends.at(Stage::kSynthesize).synthesize(request);
      row.seconds_per_batch = batch.seconds();
      std::vector<Embedding> features(batch.value.size(), Embedding(std::vector<double>{1.0}));
      const std::size_t workers = std::max<std::size_t>(1, std::min(spec.feature_concurrency, features.size()));
      std::vector<std::exception_ptr> errors(features.size());
      {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
          for (std::size_t i = next++; i < features.size(); i = next++) {
            try {
              const auto& img = batch.value[i];
              features[i] = backends.at(Stage::kImageFeatures).image_features(img.image_id(), img.png_bytes()).value;
            } catch (...) {
              errors[i] = std::current_exception();
            }
          }
        };
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
      }
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      auto stats = gaussian_stats(features);
      if (s == report.reference_steps) {
        reference = std::move(stats);
        row.fid = 0.0;
      } else if (reference) {
        row.fid = fid(*reference, stats);
      } else {
        row.error = "reference batch unavailable";
      }
    } catch (const Error& e) {
      row.error = std::string(to_string(e.code())) + ": " + e.message();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Recognition table

struct RecognitionRow {
  std::string method;
  std::string pretraining;
  std::optional<double> accuracy_pct;
  std::optional<double> fps_infer;
  std::optional<double> fps_load;
};

struct RecognitionReport {
  std::vector<RecognitionRow> rows;
};

inline RecognitionRow recognition_row(std::string method, std::string pretraining, const FpsRun& run,
                                      std::optional<double> accuracy_pct = std::nullopt) {
  return {std::move(method), std::move(pretraining), accuracy_pct, run.infer_only().fps, run.infer_and_load().fps};
}

/// Recorded values from the published recognition comparison. Rendering only.
inline RecognitionReport recorded_recognition_table() {
  return {{{"I3D", "BSL1K", 46.8, 1429, 95},
           {"", "Kinetic", 32.5, std::nullopt, std::nullopt},
           {"TSM", "✗", 20.8, 357, 60},
           {"", "Kinetic", 13.9, std::nullopt, std::nullopt},
           {"MML", "✗", 20.8, 323, 104}}};
}

/// Recorded values from the published sampling-steps comparison. Rendering only.
inline SweepReport recorded_sweep_table() {
  SweepReport r{{512, 512}, 128, std::string(kDefaultSweepPrompt), 0, 50, {}};
  const std::pair<int, std::pair<double, double>> rows[] = {
      {50, {0.0, 35.50}},   {45, {33.43, 32.05}}, {40, {30.44, 28.66}}, {35, {31.70, 25.24}},
      {30, {31.55, 21.79}}, {25, {33.19, 18.39}}, {20, {33.51, 14.97}}, {15, {40.33, 12.25}}};
  for (const auto& [steps, v] : rows) r.rows.push_back({steps, v.first, v.second, std::nullopt});
  return r;
}

// ---------------------------------------------------------------------------
// Rendering

enum class Format { kText, kJson, kCsv };

inline std::optional<Format> parse_format(std::string_view s) {
  if (s == "text" || s == "txt") return Format::kText;
  if (s == "json") return Format::kJson;
  if (s == "csv") return Format::kCsv;
  return std::nullopt;
}

namespace internal {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string fid_cell(double v) { return v == 0.0 ? "0" : fixed(v, 2); }

/// Pipe-separated columns padded to the widest cell, with a dash rule under
/// the header. Widths count UTF-8 code points.
inline std::string aligned(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> w(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = width(header[c]);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], width(r[c]));
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += " | ";
      out += cells[c];
      if (c + 1 < cells.size()) out.append(w[c] - width(cells[c]), ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::vector<std::string> rule;
  for (auto n : w) rule.emplace_back(n, '-');
  std::string out = line(header) + line(rule);
  for (const auto& r : rows) out += line(r);
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += ',';
      out += csv_field(cells[c]);
    }
    return out + "\r\n";
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

inline Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace internal

inline Json to_json(const FpsReport& r) {
  return Json{{"mode", std::string(to_string(r.mode))}, {"frames", r.frames}, {"elapsed_s", r.elapsed_s}, {"fps", r.fps}};
}

inline Json to_json(const FpsRun& r) {
  return Json{{"clips", r.clips},
              {"frames", r.frames},
              {"infer_only", to_json(r.infer_only())},
              {"infer_and_load", to_json(r.infer_and_load())}};
}

inline Json to_json(const SweepReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json j{{"steps", row.steps}, {"fid", internal::opt(row.fid)}, {"seconds_per_batch", internal::opt(row.seconds_per_batch)}};
    if (row.error) j["error"] = *row.error;
    rows.push_back(std::move(j));
  }
  return Json{{"kind", "sweep"},
              {"resolution", {{"width", r.resolution.width}, {"height", r.resolution.height}}},
              {"k", r.k},
              {"prompt", r.prompt},
              {"seed", r.seed},
              {"reference_steps", r.reference_steps},
              {"rows", std::move(rows)}};
}

inline Json to_json(const RecognitionReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"method", row.method},
                        {"pretraining", row.pretraining},
                        {"accuracy_pct", internal::opt(row.accuracy_pct)},
                        {"fps_infer_only", internal::opt(row.fps_infer)},
                        {"fps_infer_and_load", internal::opt(row.fps_load)}});
  }
  return Json{{"kind", "recognition"}, {"rows", std::move(rows)}};
}

inline std::string render(const SweepReport& r, Format format) {
  if (format == Format::kJson) return codec::dump(to_json(r)) + "\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows) {
    if (format == Format::kText) {
      rows.push_back({std::to_string(row.steps), row.fid ? internal::fid_cell(*row.fid) : "failed",
                      row.seconds_per_batch ? internal::fixed(*row.seconds_per_batch, 2) : "failed"});
    } else {
      rows.push_back({std::to_string(row.steps), row.fid ? internal::fid_cell(*row.fid) : "",
                      row.seconds_per_batch ? internal::fixed(*row.seconds_per_batch, 2) : "", row.error.value_or("")});
    }
  }
  if (format == Format::kText) return internal::aligned({"Sampling steps", "FID Score", "Seconds per Batch"}, rows);
  return internal::csv({"steps", "fid", "seconds_per_batch", "error"}, rows);
}

inline std::string render(const RecognitionReport& r, Format format) {
  if (format == Format::kJson) return codec::dump(to_json(r)) + "\n";
  auto cell = [](const std::optional<double>& v, int decimals) { return v ? internal::fixed(*v, decimals) : ""; };
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows) {
    rows.push_back({row.method, row.pretraining, cell(row.accuracy_pct, 1), cell(row.fps_infer, 0), cell(row.fps_load, 0)});
  }
  if (format == Format::kText) {
    return internal::aligned({"Method", "Pretraining", "Accuracy (%)", "FPS (infer only)", "FPS (infer & load data)"}, rows);
  }
  return internal::csv({"method", "pretraining", "accuracy_pct", "fps_infer_only", "fps_infer_and_load"}, rows);
}

}  // namespace mugcat::bench
