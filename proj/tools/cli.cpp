#include "cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include "hcap/annotation.hpp"
#include "hcap/dataset.hpp"
#include "hcap/error.hpp"
#include "hcap/gradcheck.hpp"
#include "hcap/metrics.hpp"
#include "hcap/model.hpp"
#include "hcap/synth.hpp"

#ifndef HCAP_VERSION
#define HCAP_VERSION "0.0.0"
#endif

namespace hcap::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<spdlog::logger> logger() {
  static auto lg = [] {
    auto l = spdlog::stderr_color_st("hcap");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::info);
    if (const char* env = std::getenv("HCAP_LOG")) l->set_level(spdlog::level::from_str(env));
    return l;
  }();
  return lg;
}

// Work items run on a pool; the first failure by index is rethrown, so
// errors are as deterministic as the results.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// `dir/` and `dir` name the same sibling file.
fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path q = p.lexically_normal();
  if (q.filename().empty()) q = q.parent_path();
  return q.string() + suffix;
}

std::string fmt_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> sorted_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

struct Run {
  std::string command;
  std::map<std::string, std::string> config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs, outputs;
  fs::path manifest;  // empty: printed to stderr
};

void write_manifest(const Run& run, int exit_code, const std::string& started, double seconds) {
  Json j;
  j["command"] = run.command;
  j["version"] = HCAP_VERSION;
  j["exit_code"] = exit_code;
  j["seed"] = run.seed ? Json(*run.seed) : Json(nullptr);
  j["config"] = run.config;
  j["inputs"] = run.inputs;
  j["outputs"] = run.outputs;
  Json hashes = Json::object();
  if (exit_code == 0)
    for (const auto& o : run.outputs)
      if (fs::exists(o)) hashes[o] = hash_artifact(o);
  j["artifacts"] = hashes;
  j["started_utc"] = started;
  j["wall_seconds"] = seconds;
  if (run.manifest.empty()) {
    std::cerr << "manifest: " << j.dump() << "\n";
    return;
  }
  if (run.manifest.has_parent_path()) fs::create_directories(run.manifest.parent_path());
  std::ofstream(run.manifest, std::ios::binary) << j.dump(2) << "\n";
}

// Snapshot of every option of a subcommand, defaults included.
std::map<std::string, std::string> snapshot(const CLI::App* sub) {
  std::map<std::string, std::string> out;
  for (const auto* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "manifest") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    out[name] = value;
  }
  return out;
}

// ---- commands -------------------------------------------------------------------

struct SynthFlags {
  std::uint64_t seed = 1;
  std::size_t count = 20;
  std::string out;
  std::size_t min_persons = 4, max_persons = 8, feature_dim = 256, frame_rows = 64, threads = 0;
};

int cmd_synth(const SynthFlags& f, Run& run) {
  synth::SynthConfig cfg;
  cfg.seed = f.seed;
  cfg.videos = f.count;
  cfg.min_persons = f.min_persons;
  cfg.max_persons = f.max_persons;
  cfg.feature_dim = f.feature_dim;
  cfg.frame_rows = f.frame_rows;
  cfg.validate();
  run.seed = f.seed;
  run.outputs = {f.out};
  if (fs::exists(f.out) && !fs::is_empty(f.out)) throw ConfigError("output directory is not empty: " + f.out);

  const auto proj = synth::projection(cfg);
  std::vector<synth::SynthVideo> videos(cfg.videos);
  parallel_for(cfg.videos, f.threads, [&](std::size_t i) { videos[i] = synth::generate_video(cfg, i, proj); });
  std::vector<std::string> ids;
  for (const auto& v : videos) ids.push_back(v.annotation.video_id);
  const auto split = synth::split(ids, synth::kDefaultRatios, cfg.seed);
  synth::write_corpus(f.out, videos, split);
  logger()->info("wrote {} videos to {} (train {}, val {}, test {})", videos.size(), f.out, split.train.size(),
                 split.val.size(), split.test.size());
  return 0;
}

int cmd_validate(const std::string& dir, Run& run) {
  run.inputs = {dir};
  const auto files = sorted_files(dir, ".json");
  if (files.empty()) throw ConfigError("no .json files in " + dir);
  std::size_t invalid = 0, warnings = 0;
  for (const auto& name : files) {
    const fs::path p = fs::path(dir) / name;
    std::vector<annotation::Diagnostic> warn;
    try {
      annotation::read_annotation(p, &warn);
    } catch (const annotation::ParseError& e) {
      ++invalid;
      for (const auto& d : e.diagnostics()) {
        if (d.warning) ++warnings;
        std::cout << p.string() << ": " << annotation::format(d) << "\n";
      }
      continue;
    } catch (const FormatError& e) {
      ++invalid;
      std::cout << p.string() << ": error: " << e.what() << "\n";
      continue;
    }
    warnings += warn.size();
    for (const auto& d : warn) std::cout << p.string() << ": " << annotation::format(d) << "\n";
  }
  std::cout << files.size() << " files, " << invalid << " invalid, " << warnings << " warnings\n";
  return invalid == 0 ? 0 : 1;
}

int cmd_stats(const std::string& dir, const std::string& json_out, Run& run) {
  run.inputs = {dir};
  std::vector<annotation::VideoAnnotation> corpus;
  for (const auto& name : sorted_files(dir, ".json")) corpus.push_back(annotation::read_annotation(fs::path(dir) / name));
  const auto s = annotation::stats(corpus);
  std::cout << annotation::stats_report(s);
  if (!json_out.empty()) {
    std::ofstream(json_out, std::ios::binary) << annotation::stats_json(s);
    run.outputs = {json_out};
  }
  return 0;
}

struct TrainFlags {
  std::string corpus, config, out, split = "train", loss_log;
  std::optional<std::uint64_t> seed;
  std::size_t log_every = 100;
};

int cmd_train(const TrainFlags& f, Run& run) {
  auto kv = f.config.empty() ? std::map<std::string, std::string>{} : model::read_kv_file(f.config);
  std::string preset = "desk";
  if (auto it = kv.find("preset"); it != kv.end()) {
    preset = it->second;
    kv.erase(it);
  }
  if (preset != "desk" && preset != "paper") throw ConfigError("preset must be desk or paper, got " + preset);
  if (kv.count("vocab_size")) throw ConfigError("vocab_size is derived from the corpus and cannot be configured");
  model::ModelConfig mc = preset == "paper" ? model::ModelConfig::paper() : model::ModelConfig::desk();
  auto rest = mc.apply_kv(kv);
  model::TrainConfig tc;
  rest = model::apply_kv(tc, rest);
  if (!rest.empty()) throw ConfigError("unknown config key: " + rest.begin()->first);
  if (f.seed) tc.seed = *f.seed;

  const fs::path corpus(f.corpus);
  const auto ids = synth::read_manifest(corpus / (f.split + ".txt"));
  if (ids.empty()) throw ConfigError("split " + f.split + " is empty");
  const auto videos = dataset::load_corpus(corpus, ids);
  const auto vocab = dataset::build_vocabulary(videos);
  const std::size_t feat = videos.front().frames.shape()[1], pdim = videos.front().persons.shape()[1];
  if (kv.count("feature_dim") && mc.feature_dim != feat)
    throw ConfigError("feature_dim=" + std::to_string(mc.feature_dim) + " but the corpus has " + std::to_string(feat));
  if (kv.count("person_dim") && mc.person_dim != pdim)
    throw ConfigError("person_dim=" + std::to_string(mc.person_dim) + " but the corpus has " + std::to_string(pdim));
  mc.feature_dim = feat;
  mc.person_dim = pdim;
  mc.vocab_size = vocab.size();
  mc.validate();

  std::vector<model::TrainingExample> examples;
  for (const auto& v : videos) examples.push_back(dataset::to_example(v, vocab));

  auto snap = mc.to_kv();
  for (auto& [k, v] : model::to_kv(tc)) snap[k] = v;
  snap["preset"] = preset;
  for (auto& [k, v] : snap) run.config["cfg." + k] = v;
  run.seed = tc.seed;
  const std::string loss_log = f.loss_log.empty() ? f.out + ".loss.tsv" : f.loss_log;
  run.inputs = {f.corpus};
  if (!f.config.empty()) run.inputs.push_back(f.config);
  run.outputs = {f.out, f.out + ".cfg", f.out + ".vocab", loss_log};

  model::CaptionModel m(mc, tc.seed);
  logger()->info("training {} videos, vocab {}, {} parameters, {} steps", examples.size(), vocab.size(),
                 m.params().scalar_count(), tc.steps);
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  std::ofstream log(loss_log, std::ios::binary);
  log << "step\tvideo_id\tloss\tgrad_norm\n";
  double window = 0.0;
  std::size_t in_window = 0;
  model::train(m, examples, tc, [&](const model::StepRecord& r) {
    log << r.step << '\t' << r.video_id << '\t' << fmt_double(r.loss) << '\t' << fmt_double(r.grad_norm) << '\n';
    window += r.loss;
    ++in_window;
    if (f.log_every && (r.step + 1) % f.log_every == 0) {
      logger()->info("step {} mean loss {:.4f}", r.step + 1, window / static_cast<double>(in_window));
      window = 0.0;
      in_window = 0;
    }
  });
  m.save(f.out);
  model::write_kv_file(f.out + ".cfg", snap);
  vocab.save(f.out + ".vocab");
  logger()->info("checkpoint written to {}", f.out);
  return 0;
}

struct InferFlags {
  std::string checkpoint, corpus, out, split = "all";
  std::optional<double> threshold;
  bool keep_all = false;
};

int cmd_infer(const InferFlags& f, Run& run) {
  auto kv = model::read_kv_file(f.checkpoint + ".cfg");
  kv.erase("preset");
  model::ModelConfig mc;
  model::TrainConfig unused;
  model::apply_kv(unused, mc.apply_kv(kv));
  if (f.threshold) mc.conf_threshold = *f.threshold;
  mc.validate();
  const auto vocab = text::Vocabulary::load(f.checkpoint + ".vocab");
  if (vocab.size() != mc.vocab_size) throw FormatError("vocabulary size does not match the checkpoint config");
  model::CaptionModel m(mc, 0);
  m.load(f.checkpoint);

  const fs::path corpus(f.corpus);
  const auto ids = synth::read_manifest(corpus / (f.split + ".txt"));
  run.inputs = {f.checkpoint, f.corpus};
  run.outputs = {f.out};
  fs::create_directories(f.out);
  for (const auto& id : ids) {
    const auto v = dataset::load_video(corpus, id);
    const auto preds = m.infer(dataset::to_input(v), f.keep_all);
    annotation::write_predictions(fs::path(f.out) / (id + ".json"), dataset::to_prediction_file(v.annotation, preds, vocab));
    logger()->debug("{}: {} captions", id, preds.size());
  }
  logger()->info("wrote predictions for {} videos to {}", ids.size(), f.out);
  return 0;
}

struct EvalFlags {
  std::string predictions, ground_truth, out, tsv;
  std::size_t threads = 0;
};

int cmd_eval(const EvalFlags& f, Run& run) {
  run.inputs = {f.predictions, f.ground_truth};
  run.outputs = {f.out};
  if (!f.tsv.empty()) run.outputs.push_back(f.tsv);
  const auto files = sorted_files(f.predictions, ".json");
  if (files.empty()) throw ConfigError("no prediction files in " + f.predictions);
  std::vector<metrics::VideoEval> corpus(files.size());
  parallel_for(files.size(), f.threads, [&](std::size_t i) {
    const auto preds = annotation::read_predictions(fs::path(f.predictions) / files[i]);
    const fs::path gt = fs::path(f.ground_truth) / (preds.video_id + ".json");
    if (!fs::exists(gt)) throw ConfigError("no ground truth for " + preds.video_id + " (expected " + gt.string() + ")");
    corpus[i] = dataset::to_eval(preds, annotation::read_annotation(gt));
  });
  const auto report = metrics::tiou_matched_eval(corpus);
  std::ofstream(f.out, std::ios::binary) << report.to_json();
  if (!f.tsv.empty()) std::ofstream(f.tsv, std::ios::binary) << report.to_tsv();

  std::cout << "videos " << report.videos << ", predictions " << report.predictions << ", references "
            << report.references << "\n";
  std::cout << "metric      ";
  for (double t : report.thresholds) std::cout << "  tIoU " << t;
  std::cout << "      avg\n";
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& name : metrics::metric_names()) {
    std::cout << std::left << std::setw(12) << name << std::right;
    for (double s : report.per_threshold.at(name)) std::cout << "  " << std::setw(8) << s;
    std::cout << "  " << std::setw(7) << report.average.at(name) << '\n';
  }
  std::cout << std::left << std::setw(12) << "matched" << std::right;
  for (auto n : report.matched) std::cout << "  " << std::setw(8) << n;
  std::cout << "\nSODA_c      " << std::setw(8) << report.soda_c << '\n';
  std::cout.copyfmt(std::ios(nullptr));
  std::cout.flush();
  for (const auto& d : report.diagnostics) logger()->warn("{}", d);
  return 0;
}

int cmd_gradcheck(const gradcheck::Options& opt, const std::vector<std::string>& kernels, Run& run) {
  run.seed = opt.seed;
  const auto known = gradcheck::kernel_names();
  for (const auto& k : kernels)
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown kernel: " + k);
  const auto results = gradcheck::run(opt, kernels);
  std::cout << gradcheck::format_table(results);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.pass; });
  double total = 0.0;
  for (const auto& r : results) total += r.seconds;
  std::cout << results.size() - failed << "/" << results.size() << " kernels pass in " << total << " s\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

std::map<std::string, std::string> hash_artifact(const fs::path& path) {
  std::map<std::string, std::string> out;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) out[e.path().lexically_relative(path).generic_string()] = hex64(fnv1a(slurp(e.path())));
  } else {
    out[path.filename().string()] = hex64(fnv1a(slurp(path)));
  }
  return out;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Person-centric dense video captioning toolkit", "hcap"};
  app.set_version_flag("--version", HCAP_VERSION);
  app.require_subcommand(1);
  app.footer("Environment: HCAP_LOG=trace|debug|info|warn|error|off sets log verbosity (default info).");
  std::string manifest;
  auto add_manifest = [&](CLI::App* s, const std::string& where) {
    s->add_option("--manifest", manifest, "Run manifest path (default: " + where + ")");
  };

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
  synth->add_option("--seed", sf.seed, "Random seed")->capture_default_str();
  synth->add_option("--count", sf.count, "Number of videos")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--out", sf.out, "Output corpus directory (must be empty or absent)")->required();
  synth->add_option("--min-persons", sf.min_persons, "Fewest persons per video")->capture_default_str();
  synth->add_option("--max-persons", sf.max_persons, "Most persons per video")->capture_default_str();
  synth->add_option("--feature-dim", sf.feature_dim, "Feature width")->capture_default_str();
  synth->add_option("--frame-rows", sf.frame_rows, "Frame feature rows per video")->capture_default_str();
  synth->add_option("--threads", sf.threads, "Worker threads (0: all cores)")->capture_default_str();
  add_manifest(synth, "<out>.manifest.json");

  std::string ann_dir;
  auto* validate = app.add_subcommand("validate", "Check annotation files; nonzero exit if any is invalid");
  validate->add_option("--annotations", ann_dir, "Directory of annotation .json files")->required();
  add_manifest(validate, "printed to stderr");

  std::string stats_json;
  auto* stats = app.add_subcommand("stats", "Corpus statistics tables");
  stats->add_option("--annotations", ann_dir, "Directory of annotation .json files")->required();
  stats->add_option("--json", stats_json, "Also write the statistics as JSON");
  add_manifest(stats, "printed to stderr");

  TrainFlags tf;
  std::uint64_t train_seed = 1;
  auto* train = app.add_subcommand("train", "Train a model; writes <out>, <out>.cfg, <out>.vocab and a loss log");
  train->add_option("--corpus", tf.corpus, "Corpus directory")->required();
  train->add_option("--config", tf.config, "key=value config file (preset=desk|paper plus model/training keys)");
  train->add_option("--out", tf.out, "Checkpoint path")->required();
  train->add_option("--split", tf.split, "Video list <corpus>/<split>.txt to train on")->capture_default_str();
  auto* seed_opt = train->add_option("--seed", train_seed, "Random seed (overrides the config's seed)");
  train->add_option("--loss-log", tf.loss_log, "Per-step loss TSV (default: <out>.loss.tsv)");
  train->add_option("--log-every", tf.log_every, "Steps between progress lines (0: off)")->capture_default_str();
  add_manifest(train, "<out>.manifest.json");

  InferFlags inf;
  double threshold = 0.5;
  auto* infer = app.add_subcommand("infer", "Caption a corpus split with a checkpoint");
  infer->add_option("--checkpoint", inf.checkpoint, "Checkpoint written by train")->required();
  infer->add_option("--corpus", inf.corpus, "Corpus directory")->required();
  infer->add_option("--out", inf.out, "Output directory of prediction files")->required();
  infer->add_option("--split", inf.split, "Video list <corpus>/<split>.txt")->capture_default_str();
  auto* thr_opt = infer->add_option("--threshold", threshold, "Confidence threshold (default: from the checkpoint)")
                      ->check(CLI::Range(0.0, 1.0));
  infer->add_flag("--keep-all", inf.keep_all, "Keep every query regardless of confidence");
  add_manifest(infer, "<out>.manifest.json");

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--predictions", ef.predictions, "Directory of prediction files")->required();
  eval->add_option("--ground-truth", ef.ground_truth, "Directory of annotation files")->required();
  eval->add_option("--out", ef.out, "Report JSON path")->required();
  eval->add_option("--tsv", ef.tsv, "Also write per-video rows as TSV");
  eval->add_option("--threads", ef.threads, "Worker threads (0: all cores)")->capture_default_str();
  add_manifest(eval, "<out>.manifest.json");

  gradcheck::Options go;
  std::vector<std::string> kernels;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable kernel");
  grad->add_option("--seed", go.seed, "Random seed")->capture_default_str();
  grad->add_option("--trials", go.trials, "Trials per kernel")->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_option("--kernel", kernels, "Only these kernels (repeatable)");
  add_manifest(grad, "printed to stderr");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run;
  run.command = sub->get_name();
  run.config = snapshot(sub);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  int code = 1;
  try {
    if (sub == synth) {
      run.manifest = manifest.empty() ? sibling(sf.out, ".manifest.json") : fs::path(manifest);
      code = cmd_synth(sf, run);
    } else if (sub == validate) {
      run.manifest = manifest;
      code = cmd_validate(ann_dir, run);
    } else if (sub == stats) {
      run.manifest = manifest;
      code = cmd_stats(ann_dir, stats_json, run);
    } else if (sub == train) {
      run.manifest = manifest.empty() ? fs::path(tf.out + ".manifest.json") : fs::path(manifest);
      if (seed_opt->count()) tf.seed = train_seed;
      code = cmd_train(tf, run);
    } else if (sub == infer) {
      run.manifest = manifest.empty() ? sibling(inf.out, ".manifest.json") : fs::path(manifest);
      if (thr_opt->count()) inf.threshold = threshold;
      code = cmd_infer(inf, run);
    } else if (sub == eval) {
      run.manifest = manifest.empty() ? fs::path(ef.out + ".manifest.json") : fs::path(manifest);
      code = cmd_eval(ef, run);
    } else if (sub == grad) {
      run.manifest = manifest;
      code = cmd_gradcheck(go, kernels, run);
    }
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    code = 2;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_manifest(run, code, started, seconds);
  } catch (const std::exception& e) {
    logger()->error("writing the manifest failed: {}", e.what());
    return 2;
  }
  return code;
}

}  // namespace hcap::cli
