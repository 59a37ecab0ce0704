// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// mugcat command-line interface. Exit status: 0 success, 1 runtime error,
// 2 usage error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pthread.h>

#include "CLI11.hpp"
#include "mugcat/bench.hpp"
#include "mugcat/codec.hpp"
#include "mugcat/config_file.hpp"
#include "mugcat/conformance.hpp"
#include "mugcat/gateway.hpp"
#include "mugcat/gateway_server.hpp"
#include "mugcat/http.hpp"
#include "mugcat/ingest.hpp"
#include "mugcat/pipeline.hpp"
#include "mugcat/png.hpp"
#include "mugcat/stubs.hpp"

namespace fs = std::filesystem;
using namespace mugcat;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

PipelineConfig load_config(const std::string& path) {
  return validate(config::load_default(path.empty() ? std::nullopt : std::optional<fs::path>(path)));
}

protocol::ClientOptions client_options(const PipelineConfig& c) {
  return {std::chrono::milliseconds(c.stage_deadline_ms), 64};
}

bench::Format format_from(const std::string& name) {
  const auto f = bench::parse_format(name);
  if (!f) throw UsageError("unknown format '" + name + "' (text, json, csv)");
  return *f;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + out_path);
  out << text;
}

/// Blocks SIGINT and SIGTERM in every thread started afterwards; the caller
/// then waits for one of them with sigwait.
sigset_t block_termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

int wait_for_signal(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  std::vector<std::string> inputs;
  bool flush_per_file = false;
  std::string config;
  bool json = false;
  bool redact_timings = false;
};

int cmd_run(const RunArgs& a) {
  const PipelineConfig config = load_config(a.config);
  auto connected = net::connect(config.endpoints, client_options(config));
  const auto& backends = connected.backends;

  std::vector<pipeline::StreamInput> inputs;
  for (const auto& path : a.inputs) {
    const auto stream = ingest::load_frames(path);
    const std::string source_id = fs::path(path).stem().string();
    for (auto& clip : ingest::segment(stream.frames, static_cast<std::size_t>(config.window_len),
                                      static_cast<std::size_t>(config.stride), source_id, stream.fps)) {
      inputs.emplace_back(pipeline::ClipInput{std::move(clip), std::nullopt});
    }
    if (a.flush_per_file) inputs.emplace_back(pipeline::Flush{});
  }
  if (!a.flush_per_file) inputs.emplace_back(pipeline::Flush{});

  const auto outcomes = pipeline::run_stream(inputs, config, backends,
                                             ingest::FrameSource{"run", ingest::SourceMode::kFile, 25.0});
  int status = 0;
  for (const auto& o : outcomes) {
    if (o.kind == pipeline::TurnOutcome::Kind::kTurn) {
      const ConversationTurn turn = a.redact_timings ? o.turn->with_timings(zero_timings()) : *o.turn;
      if (a.json) {
        std::cout << codec::dump(codec::to_json(turn)) << "\n";
      } else {
        const auto& sel = turn.selection();
        std::printf("turn %llu: \"%s\" -> \"%s\" (candidate %zu of %zu, score %.6f)\n",
                    static_cast<unsigned long long>(turn.turn_id()), turn.query_text().c_str(),
                    sel.selected_caption().c_str(), sel.selected_index(), turn.candidates().size(),
                    sel.scores()[sel.selected_index()]);
      }
    } else {
      std::cerr << "mugcat run: " << (o.kind == pipeline::TurnOutcome::Kind::kEmpty ? "empty turn" : "turn failed");
      if (!o.stage.empty()) std::cerr << " at " << o.stage;
      std::cerr << ": " << to_string(o.code) << ": " << o.message << "\n";
      status = kExitRuntime;
    }
  }
  return status;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string config;
  bool lazy = false;
  std::string transcript_dir;
  int io_threads = 2;
  int workers = 4;
};

int cmd_serve(const ServeArgs& a) {
  const sigset_t signals = block_termination_signals();
  const PipelineConfig config = load_config(a.config);
  auto connected = net::connect(config.endpoints, client_options(config));
  if (!a.lazy) {
    try {
      connected.backends.handshake_all();
    } catch (const Error& e) {
      throw Error(ErrorCode::kBackendUnreachable, e.message());
    }
  }
  gateway::Options options;
  if (!a.transcript_dir.empty()) options.transcript_dir = fs::path(a.transcript_dir);
  gateway::Gateway gw(config, connected.backends, options);
  gateway::Server server(gw, a.host, static_cast<unsigned short>(a.port), static_cast<std::size_t>(a.io_threads),
                         static_cast<std::size_t>(a.workers));
  server.start();
  std::cerr << "mugcat gateway listening on http://" << a.host << ":" << server.port() << std::endl;
  const int sig = wait_for_signal(signals);
  std::cerr << "mugcat gateway: signal " << sig << ", draining" << std::endl;
  server.stop();
  std::cerr << "mugcat gateway: stopped" << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// stubs

struct StubsArgs {
  std::string host = "127.0.0.1";
  int port_base = 8101;
  int recognize_latency_ms = 0;
  int load_latency_ms = 0;
  int synth_ms_per_step = 0;
};

stubs::StubOptions stub_options(int recognize_ms, int load_ms, int synth_ms_per_step) {
  stubs::StubOptions o;
  o.recognize_latency = std::chrono::milliseconds(recognize_ms);
  o.load_latency = std::chrono::milliseconds(load_ms);
  o.synth_latency_per_step = std::chrono::milliseconds(synth_ms_per_step);
  return o;
}

int cmd_stubs_up(const StubsArgs& a) {
  const sigset_t signals = block_termination_signals();
  net::StubCluster cluster(a.port_base, stub_options(a.recognize_latency_ms, a.load_latency_ms, a.synth_ms_per_step),
                           a.host);
  for (const auto& [stage, url] : cluster.endpoints()) std::cout << "endpoint." << to_string(stage) << " = " << url << "\n";
  std::cout << std::flush;
  wait_for_signal(signals);
  cluster.stop();
  return 0;
}

int cmd_conformance(const std::string& config_path, bool json) {
  const PipelineConfig config = load_config(config_path);
  std::unique_ptr<stubs::StubSet> local;
  Json reports = Json::array();
  bool ok = true;
  for (Stage s : kAllStages) {
    std::shared_ptr<protocol::Transport> transport;
    if (const auto it = config.endpoints.find(s); it != config.endpoints.end()) {
      transport = std::make_shared<net::HttpTransport>(it->second);
    } else {
      if (!local) local = std::make_unique<stubs::StubSet>();
      transport = std::make_shared<protocol::InProcessTransport>(local->service(s).handler(),
                                                                 "stub-" + std::string(to_string(s)));
    }
    const auto report = conformance::run(s, transport);
    ok = ok && report.passed();
    if (json) {
      reports.push_back(conformance::to_json(report));
    } else {
      for (const auto& c : report.checks) {
        std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << to_string(s) << ": " << c.name;
        if (!c.passed) std::cout << " (" << c.detail << ")";
        std::cout << "\n";
      }
    }
  }
  if (json) std::cout << codec::dump(reports) << "\n";
  return ok ? 0 : kExitRuntime;
}

// ---------------------------------------------------------------------------
// bench

struct FpsArgs {
  std::vector<std::string> inputs;
  int synthetic_clips = 0;
  int clip_frames = 16;
  int clip_size = 16;
  int window = 0;
  int stride = 0;
  int recognize_latency_ms = 0;
  int load_latency_ms = 0;
  std::string method = "stub";
  std::string config;
  std::string format = "text";
  std::string out;
  bool json = false;
};

int cmd_bench_fps(const FpsArgs& a) {
  PipelineConfig config = load_config(a.config);
  if (a.inputs.empty() == (a.synthetic_clips == 0)) throw UsageError("give either --input or --synthetic-clips");
  const std::size_t window = static_cast<std::size_t>(a.window > 0 ? a.window : config.window_len);
  const std::size_t stride = static_cast<std::size_t>(a.stride > 0 ? a.stride : config.stride);
  ingest::check_window(window, stride);
  auto connected = net::connect(config.endpoints, client_options(config),
                                stub_options(a.recognize_latency_ms, a.load_latency_ms, 0));

  std::vector<bench::ClipLoader> loaders;
  if (a.synthetic_clips > 0) {
    const auto side = a.clip_size;
    const auto n = a.clip_frames;
    for (int c = 0; c < a.synthetic_clips; ++c) {
      loaders.emplace_back([c, side, n] {
        std::vector<Frame> frames;
        for (int i = 0; i < n; ++i) {
          Bytes px(static_cast<std::size_t>(side) * side * 3, static_cast<std::uint8_t>((c * 31 + i * 7) & 0xFF));
          frames.emplace_back(static_cast<std::uint64_t>(c * n + i), (c * n + i) * 40.0, side, side, std::move(px));
        }
        return Clip(make_clip_id("synthetic", static_cast<std::uint64_t>(c * n)), std::move(frames), 25.0, "synthetic");
      });
    }
  } else {
    // Files are read on first use so reading and decoding fall inside the
    // load scope.
    for (const auto& path : a.inputs) {
      auto cache = std::make_shared<std::optional<std::vector<Clip>>>();
      auto load = [cache, path, window, stride] {
        if (!*cache) {
          const auto stream = ingest::load_frames(path);
          *cache = ingest::segment(stream.frames, window, stride, fs::path(path).stem().string(), stream.fps);
        }
      };
      const auto peek = ingest::load_frames(path);
      const auto count = ingest::window_count(peek.frames.size(), window, stride);
      for (std::size_t i = 0; i < count; ++i) {
        loaders.emplace_back([cache, load, i] {
          load();
          return (**cache)[i];
        });
      }
    }
    if (loaders.empty()) throw Error(ErrorCode::kInvalidWindow, "inputs are shorter than one window");
  }

  const auto run = bench::measure_fps(loaders, connected.backends.at(Stage::kRecognize));
  const bench::RecognitionReport table{{bench::recognition_row(a.method, "-", run)}};
  const auto format = a.json ? bench::Format::kJson : format_from(a.format);
  if (format == bench::Format::kJson) {
    emit(codec::dump(Json{{"run", bench::to_json(run)}, {"table", bench::to_json(table)}}) + "\n", a.out);
  } else {
    emit(bench::render(table, format), a.out);
  }
  return 0;
}

struct SweepArgs {
  std::vector<int> steps{50, 45, 40, 35, 30, 25, 20, 15};
  int width = 512;
  int height = 512;
  int k = 8;
  std::string prompt{bench::kDefaultSweepPrompt};
  std::uint64_t seed = 0;
  int synth_ms_per_step = 0;
  std::string config;
  std::string format = "text";
  std::string out;
  bool json = false;
};

int cmd_bench_sweep(const SweepArgs& a) {
  const PipelineConfig config = load_config(a.config);
  detail::require(is_allowed_resolution({a.width, a.height}), ErrorCode::kInvalidResolution,
                  std::to_string(a.width) + "x" + std::to_string(a.height) + " is not an allowed synthesis resolution");
  auto connected = net::connect(config.endpoints, client_options(config), stub_options(0, 0, a.synth_ms_per_step));
  bench::SweepSpec spec;
  spec.steps = a.steps;
  spec.resolution = {a.width, a.height};
  spec.k = a.k;
  spec.prompt = a.prompt;
  spec.seed = a.seed;
  const auto report = bench::run_sweep(spec, connected.backends);
  emit(bench::render(report, a.json ? bench::Format::kJson : format_from(a.format)), a.out);
  for (const auto& row : report.rows) {
    if (row.failed()) return kExitRuntime;
  }
  return 0;
}

std::vector<Embedding> features_of_dir(const std::string& dir, protocol::StageClient& features) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Embedding> out;
  for (const auto& f : files) {
    const Bytes bytes = ingest::read_file(f);
    out.push_back(features.image_features(f.filename().string(), bytes).value);
  }
  return out;
}

int cmd_bench_fid(const std::string& real, const std::string& generated, const std::string& config_path, bool json) {
  const PipelineConfig config = load_config(config_path);
  auto connected = net::connect(config.endpoints, client_options(config));
  auto& features = connected.backends.at(Stage::kImageFeatures);
  const auto a = features_of_dir(real, features);
  const auto b = features_of_dir(generated, features);
  const double value = bench::fid(bench::gaussian_stats(a), bench::gaussian_stats(b));
  if (json) {
    std::cout << codec::dump(Json{{"fid", value}, {"n_real", a.size()}, {"n_generated", b.size()}}) << "\n";
  } else {
    std::cout << Json(value).dump() << "\n";
  }
  return 0;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

/// One sample per line, ranked labels separated by whitespace or commas.
std::vector<std::vector<std::string>> read_predictions(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  for (auto line : read_lines(path)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream words(line);
    std::vector<std::string> ranked;
    for (std::string w; words >> w;) ranked.push_back(w);
    out.push_back(std::move(ranked));
  }
  return out;
}

int cmd_bench_accuracy(const std::string& predictions_path, const std::string& labels_path, int k, bool json) {
  if (k < 1) throw UsageError("--k must be at least 1");
  const auto predictions = read_predictions(predictions_path);
  const auto labels = read_lines(labels_path);
  const double acc = bench::topk_accuracy(predictions, labels, static_cast<std::size_t>(k));
  if (json) {
    std::cout << codec::dump(Json{{"k", k}, {"samples", labels.size()}, {"accuracy", acc}}) << "\n";
  } else {
    std::printf("top-%d accuracy: %.1f%% (%zu samples)\n", k, 100.0 * acc, labels.size());
  }
  return 0;
}

int cmd_bench_render(const std::string& fixture, const std::string& format_name, const std::string& out, bool json) {
  const auto format = json ? bench::Format::kJson : format_from(format_name);
  if (fixture == "table1") {
    emit(bench::render(bench::recorded_recognition_table(), format), out);
  } else if (fixture == "table2") {
    emit(bench::render(bench::recorded_sweep_table(), format), out);
  } else {
    throw UsageError("unknown fixture '" + fixture + "' (table1, table2)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mugcat: sign keywords to captioned images"};
  app.require_subcommand(1);
  std::function<int()> action;

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run clip files through the pipeline with configured or stub backends");
  run_cmd->add_option("--input", run.inputs, "Clip file (.mclip) or frame directory; repeatable")->required();
  run_cmd->add_flag("--flush-per-file", run.flush_per_file, "End a turn after each input");
  run_cmd->add_option("--config", run.config, "Config file (default: $MUGCAT_CONFIG)");
  run_cmd->add_flag("--json", run.json, "Print each turn as canonical JSON");
  run_cmd->add_flag("--redact-timings", run.redact_timings, "Zero all stage timings for reproducible output");
  run_cmd->callback([&] { action = [&] { return cmd_run(run); }; });

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP and WebSocket gateway");
  serve_cmd->add_option("--host", serve.host, "Listen address");
  serve_cmd->add_option("--port", serve.port, "Listen port (0 picks one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--config", serve.config, "Config file (default: $MUGCAT_CONFIG)");
  serve_cmd->add_flag("--lazy", serve.lazy, "Do not contact backends before serving");
  serve_cmd->add_option("--transcript-dir", serve.transcript_dir, "Write per-session JSON transcripts here");
  serve_cmd->add_option("--io-threads", serve.io_threads, "Network threads")->check(CLI::Range(1, 64));
  serve_cmd->add_option("--workers", serve.workers, "Request worker threads")->check(CLI::Range(1, 256));
  serve_cmd->callback([&] { action = [&] { return cmd_serve(serve); }; });

  StubsArgs stubs_args;
  auto* stubs_cmd = app.add_subcommand("stubs", "Reference backends");
  stubs_cmd->require_subcommand(1);
  auto* up_cmd = stubs_cmd->add_subcommand("up", "Serve all five stub stages on consecutive ports");
  up_cmd->add_option("--host", stubs_args.host, "Listen address");
  up_cmd->add_option("--port-base", stubs_args.port_base, "Port of the first stage (0 picks free ports)")
      ->check(CLI::Range(0, 65530));
  up_cmd->add_option("--recognize-latency-ms", stubs_args.recognize_latency_ms, "Injected latency per recognize call");
  up_cmd->add_option("--load-latency-ms", stubs_args.load_latency_ms, "Injected latency per capabilities call");
  up_cmd->add_option("--synth-ms-per-step", stubs_args.synth_ms_per_step, "Injected synthesis latency per step");
  up_cmd->callback([&] { action = [&] { return cmd_stubs_up(stubs_args); }; });

  std::string conf_config;
  bool conf_json = false;
  auto* conf_cmd = app.add_subcommand("conformance", "Run the protocol conformance checks against the backends");
  conf_cmd->add_option("--config", conf_config, "Config file (default: $MUGCAT_CONFIG)");
  conf_cmd->add_flag("--json", conf_json, "Print reports as canonical JSON");
  conf_cmd->callback([&] { action = [&] { return cmd_conformance(conf_config, conf_json); }; });

  auto* bench_cmd = app.add_subcommand("bench", "Benchmarks and report rendering");
  bench_cmd->require_subcommand(1);

  FpsArgs fps;
  auto* fps_cmd = bench_cmd->add_subcommand("fps", "Recognizer throughput, inference only and with loading");
  fps_cmd->add_option("--input", fps.inputs, "Clip file or frame directory; repeatable");
  fps_cmd->add_option("--synthetic-clips", fps.synthetic_clips, "Generate this many clips instead of reading files")
      ->check(CLI::Range(0, 1000000));
  fps_cmd->add_option("--clip-frames", fps.clip_frames, "Frames per synthetic clip")->check(CLI::Range(1, 4096));
  fps_cmd->add_option("--clip-size", fps.clip_size, "Side of synthetic frames")->check(CLI::Range(16, 4096));
  fps_cmd->add_option("--window", fps.window, "Window length for file inputs (default from config)");
  fps_cmd->add_option("--stride", fps.stride, "Stride for file inputs (default from config)");
  fps_cmd->add_option("--recognize-latency-ms", fps.recognize_latency_ms, "Stub latency per call");
  fps_cmd->add_option("--load-latency-ms", fps.load_latency_ms, "Stub model-load latency");
  fps_cmd->add_option("--method", fps.method, "Row label");
  fps_cmd->add_option("--config", fps.config, "Config file (default: $MUGCAT_CONFIG)");
  fps_cmd->add_option("--format", fps.format, "text, json or csv");
  fps_cmd->add_option("--out", fps.out, "Write the report here instead of stdout");
  fps_cmd->add_flag("--json", fps.json, "Same as --format json");
  fps_cmd->callback([&] { action = [&] { return cmd_bench_fps(fps); }; });

  SweepArgs sweep;
  auto* sweep_cmd = bench_cmd->add_subcommand("sweep", "Sampling-steps sweep with FID against the largest steps value");
  sweep_cmd->add_option("--steps", sweep.steps, "Steps values")->delimiter(',');
  sweep_cmd->add_option("--width", sweep.width, "Image width");
  sweep_cmd->add_option("--height", sweep.height, "Image height");
  sweep_cmd->add_option("--k", sweep.k, "Images per batch")->check(CLI::Range(2, 1024));
  sweep_cmd->add_option("--prompt", sweep.prompt, "Prompt");
  sweep_cmd->add_option("--seed", sweep.seed, "Seed");
  sweep_cmd->add_option("--synth-ms-per-step", sweep.synth_ms_per_step, "Stub synthesis latency per step");
  sweep_cmd->add_option("--config", sweep.config, "Config file (default: $MUGCAT_CONFIG)");
  sweep_cmd->add_option("--format", sweep.format, "text, json or csv");
  sweep_cmd->add_option("--out", sweep.out, "Write the report here instead of stdout");
  sweep_cmd->add_flag("--json", sweep.json, "Same as --format json");
  sweep_cmd->callback([&] { action = [&] { return cmd_bench_sweep(sweep); }; });

  std::string fid_real, fid_generated, fid_config;
  bool fid_json = false;
  auto* fid_cmd = bench_cmd->add_subcommand("fid", "FID between two directories of PNG images");
  fid_cmd->add_option("--real", fid_real, "Reference image directory")->required();
  fid_cmd->add_option("--generated", fid_generated, "Generated image directory")->required();
  fid_cmd->add_option("--config", fid_config, "Config file (default: $MUGCAT_CONFIG)");
  fid_cmd->add_flag("--json", fid_json, "Print canonical JSON");
  fid_cmd->callback([&] { action = [&] { return cmd_bench_fid(fid_real, fid_generated, fid_config, fid_json); }; });

  std::string acc_predictions, acc_labels;
  int acc_k = 1;
  bool acc_json = false;
  auto* acc_cmd = bench_cmd->add_subcommand("accuracy", "Top-k accuracy of ranked predictions");
  acc_cmd->add_option("--predictions", acc_predictions, "One line per sample, ranked labels")->required();
  acc_cmd->add_option("--labels", acc_labels, "One true label per line")->required();
  acc_cmd->add_option("--k", acc_k, "k");
  acc_cmd->add_flag("--json", acc_json, "Print canonical JSON");
  acc_cmd->callback([&] { action = [&] { return cmd_bench_accuracy(acc_predictions, acc_labels, acc_k, acc_json); }; });

  std::string render_fixture, render_format = "text", render_out;
  bool render_json = false;
  auto* render_cmd = bench_cmd->add_subcommand("render", "Render a recorded reference table");
  render_cmd->add_option("--fixture", render_fixture, "table1 or table2")->required();
  render_cmd->add_option("--format", render_format, "text, json or csv");
  render_cmd->add_option("--out", render_out, "Write here instead of stdout");
  render_cmd->add_flag("--json", render_json, "Same as --format json");
  render_cmd->callback([&] { action = [&] { return cmd_bench_render(render_fixture, render_format, render_out, render_json); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "usage: mugcat {run|serve|stubs up|conformance|bench {fps|sweep|fid|accuracy|render}} [options]\n";
    return kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "mugcat: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "mugcat: " << to_string(e.code()) << ": " << e.message() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "mugcat: " << e.what() << "\n";
    return kExitRuntime;
  }
}
