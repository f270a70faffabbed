// kickscore command-line interface.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "kickscore/engine.hpp"
#include "kickscore/evaluation.hpp"
#include "kickscore/model_io.hpp"
#include "kickscore/server.hpp"
#include "kickscore/synth.hpp"
#include "kickscore/training.hpp"

namespace fs = std::filesystem;
using namespace kickscore;

namespace {

std::atomic<bool> g_interrupted{false};

std::string default_config_path() {
  if (const char* env = std::getenv("KICKSCORE_CONFIG")) return env;
  return std::string(KICKSCORE_CONFIG_DIR) + "/kickscore.json";
}

std::vector<synth::KickTemplate> templates_or_default(const std::string& path) {
  return path.empty() ? synth::default_templates() : synth::load_templates(path);
}

PipelineConfig engine_config(const std::string& config_path, const std::string& model_override) {
  PipelineConfig cfg = fs::exists(config_path) ? load_pipeline_config(config_path) : PipelineConfig{};
  if (!model_override.empty()) cfg.model_path = model_override;
  if (cfg.model_path.empty()) throw Error(ErrorCode::InvalidConfig, "no model path (use --model)");
  return cfg;
}

void print_timeline(const std::vector<scoring::ScoreDecision>& decisions, const PipelineConfig& cfg) {
  std::array<int, 2> totals{};
  for (const auto& d : decisions) {
    if (d.status == scoring::DecisionStatus::Scored && d.athlete_id < 2) totals[d.athlete_id] += d.points;
    std::cout << std::fixed << std::setprecision(2) << std::setw(8) << static_cast<double>(d.event_us) * 1e-6 << "s  "
              << std::setw(5) << cfg.names[d.athlete_id % 2] << "  " << std::setw(28) << std::left
              << display_name(d.label) << std::right << "  conf " << std::setprecision(3) << d.confidence << "  "
              << std::setw(17) << to_string(d.status);
    if (d.status == scoring::DecisionStatus::Scored) std::cout << "  +" << d.points;
    if (d.status == scoring::DecisionStatus::ReferralToReferee) std::cout << "  (provisional " << d.provisional_points << ")";
    if (!d.reason.empty()) std::cout << "  [" << d.reason << "]";
    std::cout << "   " << totals[0] << "-" << totals[1] << "\n";
  }
}

synth::GeneratedStream match_stream(const std::string& script_path, std::size_t kicks, double span_s,
                                    const std::vector<synth::KickTemplate>& templates, const synth::SynthConfig& sc) {
  std::vector<synth::ScriptEntry> script;
  if (!script_path.empty()) {
    std::ifstream in(script_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + script_path);
    script = synth::script_from_json(nlohmann::json::parse(in));
  } else {
    script = synth::random_script(kicks, span_s, templates, sc.rng_seed);
  }
  return synth::generate_match_script(script, templates, sc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kickscore: Taekwondo kick classification and scoring engine"};
  app.require_subcommand(1);
  std::string config_path = default_config_path();
  app.add_option("--config", config_path, "Engine config JSON (env KICKSCORE_CONFIG)");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a labeled synthetic dataset (+ .jsonl annotations)");
  std::string gen_out, templates_path;
  std::size_t per_class = 200;
  synth::SynthConfig gen_cfg;
  bool no_valid = true;
  gen->add_option("--out", gen_out, "Dataset path")->required();
  gen->add_option("--per-class", per_class, "Instances per label");
  gen->add_option("--seed", gen_cfg.rng_seed, "RNG seed");
  gen->add_option("--noise-accel", gen_cfg.noise_std_accel, "Accel noise std, m/s^2");
  gen->add_option("--noise-gyro", gen_cfg.noise_std_gyro, "Gyro noise std, rad/s");
  gen->add_option("--miss-prob", gen_cfg.miss_probability, "Probability a kick makes no contact");
  gen->add_option("--templates", templates_path, "Template table JSON");
  gen->add_option("--no-valid", no_valid, "Include NoValidKick (rest/foul) instances");

  // train
  auto* train = app.add_subcommand("train", "Train a model and report cross-validated accuracy");
  std::string train_data, model_out;
  svm::SvmParams params;
  std::size_t ensemble = 0, folds = 5;
  bool grid = false;
  train->add_option("--data", train_data, "Dataset path")->required();
  train->add_option("--model", model_out, "Output model path")->required();
  train->add_option("--C", params.C, "Regularization");
  train->add_option("--gamma", params.gamma, "RBF gamma");
  train->add_option("--temperature", params.temperature, "Softmax temperature");
  train->add_option("--seed", params.seed, "Training seed");
  train->add_option("--ensemble", ensemble, "Bagged ensemble size (odd); 0 trains a single model");
  train->add_option("--folds", folds, "Cross-validation folds");
  train->add_flag("--grid", grid, "Grid-search C and gamma by cross-validation first");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Per-class precision/recall and confusion matrix");
  std::string eval_data, eval_model, eval_json;
  eval->add_option("--data", eval_data, "Dataset path")->required();
  eval->add_option("--model", eval_model, "Model path")->required();
  eval->add_option("--json", eval_json, "Write the report as JSON here");

  // simulate-match
  auto* sim = app.add_subcommand("simulate-match", "Replay a scripted match through the pipeline");
  std::string sim_model, sim_script, sim_log, sim_mode;
  std::size_t sim_kicks = 20;
  double sim_span = 180.0;
  synth::SynthConfig sim_cfg;
  sim->add_option("--model", sim_model, "Model path (overrides config)");
  sim->add_option("--script", sim_script, "Script JSON {\"kicks\":[{athlete,label,offset_s}]}");
  sim->add_option("--kicks", sim_kicks, "Random script: number of kicks");
  sim->add_option("--duration", sim_span, "Random script: match length, s");
  sim->add_option("--seed", sim_cfg.rng_seed, "RNG seed");
  sim->add_option("--mode", sim_mode, "Rubric mode: Proposed | CurrentWT");
  sim->add_option("--log", sim_log, "Write the decision log (JSON lines) here");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve referee consoles while replaying a match");
  std::string serve_model, serve_listen = "127.0.0.1:7878", serve_token, serve_script;
  double serve_speed = 1.0, serve_linger = -1.0;
  std::size_t serve_kicks = 20;
  synth::SynthConfig serve_cfg;
  serve->add_option("--model", serve_model, "Model path (overrides config)");
  serve->add_option("--listen", serve_listen, "host:port");
  serve->add_option("--token", serve_token, "Referee shared secret")->required();
  serve->add_option("--script", serve_script, "Script JSON (random match when absent)");
  serve->add_option("--kicks", serve_kicks, "Random script: number of kicks");
  serve->add_option("--seed", serve_cfg.rng_seed, "RNG seed");
  serve->add_option("--speed", serve_speed, "Replay speed factor (0 = as fast as possible)");
  serve->add_option("--linger", serve_linger, "Seconds to keep serving after the match (<0: until interrupted)");

  // bench-latency
  auto* bench = app.add_subcommand("bench-latency", "Per-event feature extraction + classification time");
  std::string bench_model;
  std::size_t bench_events = 1000;
  std::uint64_t bench_seed = 7;
  double bench_budget = 50.0;
  bench->add_option("--model", bench_model, "Model path")->required();
  bench->add_option("--events", bench_events, "Number of events");
  bench->add_option("--seed", bench_seed, "RNG seed");
  bench->add_option("--budget-ms", bench_budget, "Latency budget for the pass/fail line");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto ds = synth::generate_dataset(templates_or_default(templates_path), per_class, gen_cfg, no_valid);
      synth::save_dataset(ds, gen_out);
      std::cout << "wrote " << ds.annotations.size() << " instances (" << ds.frames.size() << " frames) to " << gen_out
                << "\n";
    } else if (*train) {
      const auto ds = synth::load_dataset(train_data);
      const auto data = dataset_samples(ds);
      if (grid) {
        const auto g = svm::grid_search(data, params, {1.0, 10.0, 100.0},
                                        {0.5 / kFeatureCount, 1.0 / kFeatureCount, 2.0 / kFeatureCount}, folds);
        for (const auto& [p, acc] : g.table)
          std::cout << "  C=" << p.C << " gamma=" << p.gamma << "  cv accuracy " << acc << "\n";
        params = g.best;
      }
      const double cv = svm::cross_validate(data, params, folds, params.seed);
      std::cout << folds << "-fold cross-validation accuracy: " << std::setprecision(4) << cv << "\n";
      svm::TechniqueModel model = ensemble > 0
                                      ? svm::TechniqueModel{svm::train_ensemble(data, params, ensemble, params.seed)}
                                      : svm::TechniqueModel{svm::train_svm(data, params)};
      svm::save_model(model, model_out);
      std::cout << "model written to " << model_out << "\n";
    } else if (*eval) {
      const auto model = svm::load_model(eval_model);
      const auto data = dataset_samples(synth::load_dataset(eval_data));
      const auto cm = confusion(model, data);
      std::cout << cm.to_text() << "\n";
      std::cout << std::setw(16) << "label" << std::setw(11) << "precision" << std::setw(8) << "recall\n";
      for (std::size_t k = 0; k < cm.labels.size(); ++k)
        std::cout << std::setw(16) << to_string(cm.labels[k]) << std::fixed << std::setprecision(3) << std::setw(11)
                  << cm.precision(k) << std::setw(8) << cm.recall(k) << "\n";
      std::cout << "accuracy " << cm.accuracy() << ", row-diagonally dominant: "
                << (cm.row_diagonally_dominant() ? "yes" : "no") << "\n";
      if (!eval_json.empty()) std::ofstream(eval_json) << cm.to_json().dump(2) << "\n";
      else std::cout << cm.to_json().dump() << "\n";
    } else if (*sim) {
      auto cfg = engine_config(config_path, sim_model);
      if (!sim_mode.empty()) {
        const auto m = scoring::mode_from_string(sim_mode);
        if (!m) throw Error(ErrorCode::InvalidConfig, "unknown mode " + sim_mode);
        cfg.mode = *m;
      }
      const auto model = load_pipeline_model(cfg);
      const auto stream = match_stream(sim_script, sim_kicks, sim_span, synth::default_templates(), sim_cfg);
      const auto r = run_pipeline(stream.frames, cfg, model);
      print_timeline(r.decisions, cfg);
      std::cout << "final " << cfg.names[0] << " " << r.totals[0] << " - " << r.totals[1] << " " << cfg.names[1]
                << "  (" << r.decisions.size() << " decisions, " << stream.annotations.size() << " scripted kicks, "
                << r.counters.frames_corrupt << " corrupt frames)\n";
      std::cout << "processing latency p50 " << r.processing.p50_ms << " ms, p99 " << r.processing.p99_ms << " ms\n";
      if (!sim_log.empty()) std::ofstream(sim_log, std::ios::binary) << r.decision_log;
    } else if (*serve) {
      const auto cfg = engine_config(config_path, serve_model);
      const auto model = load_pipeline_model(cfg);
      const auto colon = serve_listen.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--listen must be host:port");
      const auto host = serve_listen.substr(0, colon);
      const auto port = static_cast<std::uint16_t>(std::stoi(serve_listen.substr(colon + 1)));
      const auto stream = match_stream(serve_script, serve_kicks, 180.0, synth::default_templates(), serve_cfg);

      Engine engine(cfg, model);
      ConsoleServer server(engine, serve_token, host, port);
      std::signal(SIGINT, [](int) { g_interrupted = true; });
      std::signal(SIGTERM, [](int) { g_interrupted = true; });
      std::cout << "serving consoles on " << host << ":" << server.port() << std::endl;

      const auto start = std::chrono::steady_clock::now();
      constexpr std::size_t kBatch = 60;
      for (std::size_t i = 0; i < stream.frames.size() && !g_interrupted; i += kBatch) {
        const auto n = std::min(kBatch, stream.frames.size() - i);
        if (serve_speed > 0) {
          const auto due = std::chrono::microseconds(
              static_cast<std::int64_t>(static_cast<double>(stream.frames[i].timestamp_us) / serve_speed));
          std::this_thread::sleep_until(start + due);
        }
        engine.ingest_frames(std::span(stream.frames).subspan(i, n));
      }
      engine.finish();
      const auto snap = engine.snapshot();
      std::cout << "match over: " << snap.athletes()[0].score << " - " << snap.athletes()[1].score << std::endl;
      const auto linger_start = std::chrono::steady_clock::now();
      while (!g_interrupted &&
             (serve_linger < 0 || std::chrono::steady_clock::now() - linger_start <
                                      std::chrono::duration<double>(serve_linger)))
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      server.stop();
    } else if (*bench) {
      const auto model = svm::load_model(bench_model);
      const auto templates = synth::default_templates();
      synth::SynthConfig sc;
      sc.rng_seed = bench_seed;
      const std::size_t per_class = std::max<std::size_t>(1, bench_events / templates.size());
      const auto ds = synth::generate_dataset(templates, per_class, sc, false);
      const auto windows = dataset_windows(ds);
      std::vector<double> ms;
      ms.reserve(windows.size());
      for (const auto& aw : windows) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto v = extract_features(aw.window, sc.stance);
        [[maybe_unused]] const auto p = svm::predict(model, v);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      const auto s = summarize_latency(ms);
      std::cout << std::fixed << std::setprecision(4) << "events " << s.count << "  p50 " << s.p50_ms << " ms  p99 "
                << s.p99_ms << " ms  max " << s.max_ms << " ms  budget " << bench_budget << " ms: "
                << (s.p99_ms < bench_budget ? "PASS" : "FAIL") << "\n";
      return s.p99_ms < bench_budget ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "kickscore: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "kickscore: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
