#include "vpanel/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vpanel/benchmark.hpp"
#include "vpanel/config.hpp"
#include "vpanel/error.hpp"
#include "vpanel/harness.hpp"
#include "vpanel/mock_server.hpp"
#include "vpanel/needlesim.hpp"
#include "vpanel/panelizer.hpp"
#include "vpanel/version.hpp"

namespace vpanel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags layered over config file and environment; each applies only when
// given on the command line.
struct PolicyFlags {
  std::string config_path;
  int context_window = 0;
  std::string grid;
  std::string gamma;
  bool baseline = false;
  bool lowres_input = false;
  bool force_panels = false;
  double fps = 0.0;
  std::string decoder_cmd;
  std::string probe_cmd;
  int parallelism = 0;
  CLI::Option* context_opt = nullptr;
  CLI::Option* grid_opt = nullptr;
  CLI::Option* gamma_opt = nullptr;
  CLI::Option* fps_opt = nullptr;
  CLI::Option* decoder_opt = nullptr;
  CLI::Option* probe_opt = nullptr;
  CLI::Option* parallelism_opt = nullptr;

  void add_config(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file (overridden by env and flags)")
        ->check(CLI::ExistingFile);
  }

  void add_policy(CLI::App* app, bool with_modes = true) {
    add_config(app);
    context_opt = app->add_option("--context-window,--context", context_window,
                                  "images the model accepts per query (C)");
    grid_opt = app->add_option("--grid", grid, "panel grid RxC, e.g. 2x2");
    gamma_opt = app->add_option("--gamma", gamma, "min spacing: <float>fps or <float>f");
    if (with_modes) {
      auto* b = app->add_flag("--baseline", baseline, "force the no-panel plan");
      auto* l = app->add_flag("--lowres-input", lowres_input,
                              "no panels; frames shrunk to tile size when paneling would trigger");
      auto* f = app->add_flag("--force-panels", force_panels, "panel regardless of gamma");
      b->excludes(l)->excludes(f);
      l->excludes(f);
    }
  }

  void add_source(CLI::App* app) {
    fps_opt = app->add_option("--fps", fps, "frame rate override for image directories");
    decoder_opt = app->add_option("--decoder-cmd", decoder_cmd,
                                  "decoder template with {uri},{width},{height}");
    probe_opt = app->add_option("--probe-cmd", probe_cmd, "probe template with {uri}");
  }

  void add_parallelism(CLI::App* app) {
    parallelism_opt = app->add_option("--parallelism", parallelism, "worker count");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply_file(config_path);
    cfg.apply_process_env();
    if (context_opt && context_opt->count()) cfg.policy.context_window = context_window;
    if (grid_opt && grid_opt->count()) {
      const auto [rows, cols] = parse_grid(grid);
      cfg.policy.beta = rows;
      cfg.policy.alpha = cols;
    }
    if (gamma_opt && gamma_opt->count()) cfg.policy.gamma = GammaSpec::parse(gamma);
    if (baseline) cfg.mode = PlanMode::Baseline;
    if (lowres_input) cfg.mode = PlanMode::LowResInput;
    if (force_panels) cfg.mode = PlanMode::ForcePanels;
    if (fps_opt && fps_opt->count()) cfg.source.fps_override = fps;
    if (decoder_opt && decoder_opt->count()) cfg.source.decoder_cmd = decoder_cmd;
    if (probe_opt && probe_opt->count()) cfg.source.probe_cmd = probe_cmd;
    if (parallelism_opt && parallelism_opt->count()) cfg.parallelism = parallelism;
    return cfg;
  }
};

struct EndpointFlags {
  std::string endpoint;
  std::string model;
  int max_images = 0;
  int retries = 0;
  double timeout = 0.0;
  int concurrency = 0;
  std::string api_key_env;
  CLI::Option* endpoint_opt = nullptr;
  CLI::Option* model_opt = nullptr;
  CLI::Option* max_images_opt = nullptr;
  CLI::Option* retries_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;
  CLI::Option* concurrency_opt = nullptr;
  CLI::Option* key_opt = nullptr;

  void add(CLI::App* app) {
    endpoint_opt = app->add_option("--endpoint", endpoint, "base url, e.g. http://host:8000/v1");
    model_opt = app->add_option("--model", model, "model name sent with each request");
    max_images_opt = app->add_option("--max-images", max_images, "images accepted per request");
    retries_opt = app->add_option("--retries", retries, "retries on transient failures");
    timeout_opt = app->add_option("--timeout", timeout, "request timeout in seconds");
    concurrency_opt = app->add_option("--concurrency", concurrency, "requests in flight");
    key_opt = app->add_option("--api-key-env", api_key_env, "env var holding the bearer token");
  }

  void apply(RunConfig& cfg) const {
    if (endpoint_opt->count()) cfg.endpoint.base_url = endpoint;
    if (model_opt->count()) cfg.endpoint.model_name = model;
    if (max_images_opt->count()) cfg.endpoint.max_images_per_request = max_images;
    if (retries_opt->count()) cfg.endpoint.max_retries = retries;
    if (timeout_opt->count()) cfg.endpoint.timeout_seconds = timeout;
    if (concurrency_opt->count()) cfg.endpoint.concurrency_limit = concurrency;
    if (key_opt->count()) cfg.endpoint.api_key_env = api_key_env;
  }
};

void write_json_file(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
}

json read_json_file(const fs::path& path, ErrorKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(kind, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(kind, path.string() + ": " + e.what());
  }
}

std::string join(const std::vector<std::int64_t>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

void print_plan(std::ostream& out, const SamplePlan& plan, double gamma_frames) {
  out << "panel_active=" << (plan.panel_active ? "true" : "false") << '\n'
      << "T=" << plan.frames_to_sample << '\n'
      << "mode=" << to_string(plan.mode) << '\n'
      << "gamma_frames=" << fmt::format("{}", gamma_frames) << '\n'
      << "grid=" << format_grid(plan.grid_rows, plan.grid_cols) << '\n'
      << "tile=" << plan.tile_width << 'x' << plan.tile_height << '\n'
      << "panel_count=" << plan.panel_count << '\n'
      << "pad_frames=" << plan.pad_frames << '\n'
      << "frame_indices=" << join(plan.frame_indices) << '\n';
}

MockVlmServer* g_serving = nullptr;

extern "C" void stop_serving(int) {
  if (g_serving != nullptr) g_serving->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vpanel: multi-frame panel prompting for long-video QA", "vpanel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  // probe
  PolicyFlags probe_flags;
  std::string probe_uri;
  auto* probe_cmd = app.add_subcommand("probe", "print video metadata as JSON");
  probe_cmd->add_option("uri", probe_uri, "image directory or video")->required();
  probe_flags.add_config(probe_cmd);
  probe_flags.add_source(probe_cmd);

  // plan
  PolicyFlags plan_flags;
  std::string plan_uri;
  std::int64_t plan_frames = 0;
  int plan_width = 640;
  int plan_height = 480;
  bool plan_json = false;
  auto* plan_cmd = app.add_subcommand("plan", "resolve the sampling plan for a video");
  plan_cmd->add_option("uri", plan_uri, "image directory or video (or use --frames)");
  auto* frames_opt = plan_cmd->add_option("--frames", plan_frames, "frame count without a video");
  plan_cmd->add_option("--width", plan_width, "frame width with --frames");
  plan_cmd->add_option("--height", plan_height, "frame height with --frames");
  plan_cmd->add_flag("--json", plan_json, "print the plan as JSON");
  plan_flags.add_policy(plan_cmd);
  plan_flags.add_source(plan_cmd);
  frames_opt->excludes(plan_cmd->get_option("uri"));

  // panelize
  PolicyFlags pan_flags;
  std::string pan_uri;
  std::string pan_out;
  auto* pan_cmd = app.add_subcommand("panelize", "write panel images and a manifest");
  pan_cmd->add_option("uri", pan_uri, "image directory or video")->required();
  pan_cmd->add_option("--out", pan_out, "output directory")->required();
  pan_flags.add_policy(pan_cmd);
  pan_flags.add_source(pan_cmd);

  // eval
  PolicyFlags eval_flags;
  EndpointFlags eval_endpoint;
  std::string eval_dataset;
  std::string eval_format = "generic";
  std::string eval_panels;
  std::string eval_template;
  std::string eval_buckets;
  std::string eval_out = "run.json";
  std::string eval_predictions;
  std::string eval_run_id;
  bool eval_dry_run = false;
  auto* eval_cmd = app.add_subcommand("eval", "query a model with panelized videos and score it");
  eval_cmd->add_option("--dataset", eval_dataset, "dataset file")->required();
  eval_cmd->add_option("--format", eval_format, "generic|vmme|timescope");
  eval_cmd->add_option("--panels-dir", eval_panels, "directory tree of manifests")->required();
  auto* template_opt = eval_cmd->add_option("--template", eval_template,
                                            "default|p1|p2|p3|custom:<text>");
  auto* buckets_opt = eval_cmd->add_option("--buckets", eval_buckets,
                                           "vmme|timescope|timescope-coarse|all|name:upper,...");
  eval_cmd->add_option("--out", eval_out, "run result JSON");
  eval_cmd->add_option("--predictions", eval_predictions,
                       "append-only prediction log (default: <out>.predictions.jsonl)");
  eval_cmd->add_option("--run-id", eval_run_id, "run identifier (default: out file stem)");
  eval_cmd->add_flag("--dry-run", eval_dry_run, "print the request plan without network calls");
  eval_flags.add_config(eval_cmd);
  eval_flags.add_parallelism(eval_cmd);
  eval_endpoint.add(eval_cmd);

  // report
  PolicyFlags report_flags;
  std::string report_a;
  std::string report_b;
  std::string report_json;
  auto* report_cmd = app.add_subcommand("report", "compare two runs (deltas are b - a)");
  report_cmd->add_option("--a", report_a, "first run result")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--b", report_b, "second run result")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--json", report_json, "also write the comparison as JSON");
  report_flags.add_config(report_cmd);

  // simulate
  PolicyFlags sim_flags;
  EndpointFlags sim_endpoint;
  SimConfig sim;
  std::string sim_json;
  std::string sim_color = "255,0,255";
  std::string sim_baseline_mode = "baseline";
  auto* sim_cmd = app.add_subcommand("simulate", "needle-in-a-haystack detection, baseline vs panels");
  sim_cmd->add_option("--duration-frames", sim.duration_frames, "haystack length D in frames");
  auto* sim_fps = sim_cmd->add_option("--fps", sim.fps, "haystack frame rate");
  sim_cmd->add_option("--width", sim.width, "frame width");
  sim_cmd->add_option("--height", sim.height, "frame height");
  sim_cmd->add_option("--needle-length", sim.needle_length, "needle length in frames");
  sim_cmd->add_option("--needle-color", sim_color, "needle colour R,G,B");
  sim_cmd->add_option("--trials", sim.trials, "number of trials");
  auto* sim_seed = sim_cmd->add_option("--seed", sim.seed, "random seed");
  sim_cmd->add_option("--baseline-mode", sim_baseline_mode, "baseline|lowres-input")
      ->check(CLI::IsMember({"baseline", "lowres-input"}));
  sim_cmd->add_option("--json", sim_json, "write the report as JSON");
  sim_flags.add_policy(sim_cmd, false);
  sim_flags.add_parallelism(sim_cmd);
  sim_endpoint.add(sim_cmd);

  // serve-mock
  std::string mock_color = "255,0,255";
  std::string mock_host = "127.0.0.1";
  std::string mock_fixed;
  int mock_port = 8000;
  auto* mock_cmd = app.add_subcommand("serve-mock", "serve the deterministic mock model over HTTP");
  mock_cmd->add_option("--needle-color", mock_color, "colour that counts as the needle, R,G,B");
  mock_cmd->add_option("--port", mock_port, "port (0 picks one)");
  mock_cmd->add_option("--host", mock_host, "bind address");
  mock_cmd->add_option("--fixed-answer", mock_fixed, "always reply with this text instead");

  // make-needle
  NeedleSpec needle;
  std::string needle_out;
  std::string needle_color = "255,0,255";
  std::string needle_dataset;
  std::int64_t needle_start = 0;
  std::int64_t needle_length = 1;
  auto* needle_cmd = app.add_subcommand("make-needle", "write a synthetic needle video as PNG frames");
  needle_cmd->add_option("--out", needle_out, "output directory")->required();
  needle_cmd->add_option("--frames", needle.haystack_frames, "haystack length in frames");
  needle_cmd->add_option("--fps", needle.fps, "frame rate");
  needle_cmd->add_option("--width", needle.width, "frame width");
  needle_cmd->add_option("--height", needle.height, "frame height");
  needle_cmd->add_option("--needle-start", needle_start, "first needle frame");
  needle_cmd->add_option("--needle-length", needle_length, "needle length in frames");
  needle_cmd->add_option("--needle-color", needle_color, "needle colour R,G,B");
  needle_cmd->add_option("--seed", needle.seed, "distractor seed");
  needle_cmd->add_option("--dataset-out", needle_dataset, "append a matching question (JSONL)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolkitVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) {
      err << "run 'vpanel " << app.get_subcommands().front()->get_name() << " --help' for usage\n";
    }
    return 2;
  }

  try {
    if (*probe_cmd) {
      const RunConfig cfg = probe_flags.resolve();
      out << json(probe(probe_uri, cfg.source)).dump(2) << '\n';
      return 0;
    }

    if (*plan_cmd) {
      const RunConfig cfg = plan_flags.resolve();
      cfg.validate();
      VideoMeta meta;
      if (frames_opt->count()) {
        const double fps = cfg.source.fps_override.value_or(1.0);
        meta = VideoMeta::from_count(plan_frames, fps, plan_width, plan_height);
      } else if (!plan_uri.empty()) {
        meta = open_source(plan_uri, cfg.source)->meta();
      } else {
        err << "usage error: plan needs a uri or --frames\n";
        return 2;
      }
      const SamplePlan plan = plan_sampling(cfg.policy, meta, cfg.mode);
      if (plan_json) {
        out << json{{"video", meta}, {"policy", cfg.policy}, {"plan", plan}, {"config", cfg.to_json()}}
                   .dump(2)
            << '\n';
      } else {
        print_plan(out, plan, resolve_gamma(cfg.policy, meta));
      }
      return 0;
    }

    if (*pan_cmd) {
      const RunConfig cfg = pan_flags.resolve();
      cfg.validate();
      auto source = open_source(pan_uri, cfg.source);
      const Manifest m = panelize_video(*source, cfg.policy, cfg.mode, pan_out, cfg.to_json());
      out << fmt::format("{} panel(s), grid {}, tile {}x{}, T={} -> {}\n", m.panels.size(),
                         format_grid(m.plan.grid_rows, m.plan.grid_cols), m.plan.tile_width,
                         m.plan.tile_height, m.plan.frames_to_sample,
                         (fs::path(pan_out) / "manifest.json").string());
      return 0;
    }

    if (*eval_cmd) {
      RunConfig cfg = eval_flags.resolve();
      eval_endpoint.apply(cfg);
      if (template_opt->count()) cfg.template_name = eval_template;
      if (buckets_opt->count()) cfg.buckets = eval_buckets;
      cfg.validate();

      const auto items = load_dataset(eval_dataset, parse_dataset_format(eval_format));
      const ManifestIndex index = ManifestIndex::scan(eval_panels);

      if (eval_dry_run) {
        std::int64_t images = 0;
        out << fmt::format("{:<24} {:>7} {:>5} {:>12}  {}\n", "item", "panels", "grid",
                           "panel_active", "video");
        for (const QAItem& item : items) {
          const auto* entry = index.find(item.video_uri);
          if (entry == nullptr) {
            throw Error(ErrorKind::PlanViolation,
                        fmt::format("no manifest for item '{}' (video '{}')", item.item_id,
                                    item.video_uri));
          }
          const SamplePlan& plan = entry->manifest.plan;
          images += plan.panel_count;
          if (plan.panel_count > cfg.endpoint.max_images_per_request) {
            throw Error(ErrorKind::ConfigError,
                        fmt::format("item '{}' needs {} images, endpoint accepts {}", item.item_id,
                                    plan.panel_count, cfg.endpoint.max_images_per_request));
          }
          out << fmt::format("{:<24} {:>7} {:>5} {:>12}  {}\n", item.item_id, plan.panel_count,
                             format_grid(plan.grid_rows, plan.grid_cols),
                             plan.panel_active ? "true" : "false", item.video_uri);
        }
        out << fmt::format("requests={} images={} template={}\n", items.size(), images,
                           cfg.template_name);
        return 0;
      }

      EvalOptions opts;
      opts.prompt_template = PromptTemplate::parse(cfg.template_name);
      opts.buckets = DurationBuckets::parse(cfg.buckets);
      opts.run_id = eval_run_id.empty() ? fs::path(eval_out).stem().string() : eval_run_id;
      opts.config_echo = cfg.to_json();
      opts.concurrency = cfg.endpoint.concurrency_limit;
      opts.predictions_path = eval_predictions.empty()
                                  ? fs::path(eval_out).replace_extension(".predictions.jsonl")
                                  : fs::path(eval_predictions);
      HttpModelClient client(cfg.endpoint);
      const EvalResult result = evaluate(items, index, opts, client);
      write_json_file(eval_out, result.to_json());
      out << fmt::format("accuracy={:.4f} items={} unparsable={} errors={} -> {}\n",
                         result.accuracy_overall, items.size(), result.unparsable_count,
                         result.error_count, eval_out);
      for (const auto& [name, score] : result.accuracy_by_bucket) {
        out << fmt::format("  {:<12} {:.4f} ({}/{})\n", name, score.accuracy, score.correct,
                           score.total);
      }
      return 0;
    }

    if (*report_cmd) {
      const RunConfig cfg = report_flags.resolve();
      const EvalResult a = EvalResult::from_json(read_json_file(report_a, ErrorKind::ReportError));
      const EvalResult b = EvalResult::from_json(read_json_file(report_b, ErrorKind::ReportError));
      const RunComparison cmp = compare_runs(a, b);
      out << render_table(cmp);
      if (!report_json.empty()) {
        json doc = to_json(cmp);
        doc["parser_version"] = {{"a", a.parser_version}, {"b", b.parser_version}};
        doc["config"] = cfg.to_json();
        doc["run_configs"] = {{"a", a.config}, {"b", b.config}};
        write_json_file(report_json, doc);
      }
      return 0;
    }

    if (*sim_cmd) {
      RunConfig cfg = sim_flags.resolve();
      sim_endpoint.apply(cfg);
      if (!sim_seed->count()) sim.seed = cfg.seed != 0 ? cfg.seed : sim.seed;
      if (!sim_fps->count() && cfg.source.fps_override) sim.fps = *cfg.source.fps_override;
      cfg.seed = sim.seed;
      cfg.validate();
      sim.policy = cfg.policy;
      sim.parallelism = cfg.parallelism;
      sim.needle_color = parse_color(sim_color);
      sim.baseline_mode = parse_plan_mode(sim_baseline_mode);

      std::unique_ptr<MockVlmServer> server;
      EndpointConfig endpoint = cfg.endpoint;
      if (!sim_endpoint.endpoint_opt->count() && std::getenv("VPANEL_ENDPOINT") == nullptr) {
        server = std::make_unique<MockVlmServer>(needle_responder(sim.needle_color));
        server->start();
        endpoint.base_url = server->base_url();
      }
      endpoint.max_images_per_request =
          std::max<int>(endpoint.max_images_per_request, cfg.policy.context_window);
      HttpModelClient client(endpoint);
      SimReport report = run_simulation(sim, client);
      report.config["run_config"] = cfg.to_json();
      if (server) server->stop();

      out << fmt::format("trials={} D={} C={} grid={} needle_length={}\n", report.trials,
                         sim.duration_frames, sim.policy.context_window,
                         format_grid(sim.policy.beta, sim.policy.alpha), sim.needle_length);
      out << fmt::format("baseline: T={} detection={:.4f} expected={:.4f} (se {:.4f})\n",
                         report.plan_baseline.frames_to_sample, report.detection_rate_baseline,
                         report.expectation_baseline, report.standard_error_baseline());
      out << fmt::format("panels:   T={} detection={:.4f} expected={:.4f} (se {:.4f})\n",
                         report.plan_panels.frames_to_sample, report.detection_rate_panels,
                         report.expectation_panels, report.standard_error_panels());
      out << "delta=" << format_points((report.detection_rate_panels - report.detection_rate_baseline) * 100.0)
          << " points\n";
      if (!sim_json.empty()) write_json_file(sim_json, report.to_json());
      return 0;
    }

    if (*mock_cmd) {
      MockVlmServer::Responder responder = needle_responder(parse_color(mock_color));
      if (!mock_fixed.empty()) {
        responder = [mock_fixed](const ChatRequest&) { return MockReply{200, mock_fixed}; };
      }
      MockVlmServer server(std::move(responder));
      g_serving = &server;
      std::signal(SIGINT, stop_serving);
      std::signal(SIGTERM, stop_serving);
      err << fmt::format("serving mock model on http://{}:{}/v1\n", mock_host, mock_port);
      server.run(mock_host, mock_port);
      g_serving = nullptr;
      return 0;
    }

    if (*needle_cmd) {
      needle.needle_color = parse_color(needle_color);
      needle.needles = {{needle_start, needle_length}};
      auto source = generate_video(needle, needle_out);
      if (!needle_dataset.empty()) {
        const QAItem item = needle_question(needle, fs::path(needle_out).filename().string(),
                                            needle_out);
        std::ofstream ds(needle_dataset, std::ios::app);
        ds << json(item).dump() << '\n';
      }
      out << fmt::format("{} frames at {} fps -> {}\n", source->meta().frame_count,
                         source->meta().fps, needle_out);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace vpanel
