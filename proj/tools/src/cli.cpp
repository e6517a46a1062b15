#include "direcnet_cli/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "direcnet/bench.hpp"
#include "direcnet/checkpoint.hpp"
#include "direcnet/error.hpp"
#include "direcnet/image_io.hpp"
#include "direcnet/io.hpp"
#include "direcnet/manifest.hpp"
#include "direcnet/metrics.hpp"
#include "direcnet/model.hpp"
#include "direcnet/scoring.hpp"
#include "direcnet/train.hpp"

namespace direcnet::cli {
namespace fs = std::filesystem;

namespace {

// Raised for argument combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonData {
  std::string manifest;
  std::string data_root;
  std::uint64_t seed = 0;
};

DatasetManifest open_manifest(const CommonData& d, std::ostream& err) {
  ManifestOptions opts;
  if (!d.data_root.empty()) opts.root = fs::path(d.data_root);
  opts.check = ImageCheck::exists;
  DatasetManifest m = load_manifest(d.manifest, opts);
  if (!m.fully_assigned()) {
    for (const auto& w : assign_splits(m, {}, d.seed)) err << "warning: " << w << "\n";
  }
  return m;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// `base.csv` plus `base.json` next to it.
void write_report_pair(const std::string& path, const std::string& csv, const std::string& json) {
  fs::path base(path);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  fs::path csv_path = base, json_path = base;
  if (base.extension() == ".json") {
    csv_path.replace_extension(".csv");
  } else {
    json_path.replace_extension(".json");
    if (!base.has_extension()) csv_path.replace_extension(".csv");
  }
  write_file_atomic(csv_path, csv);
  write_file_atomic(json_path, json);
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  CommonData data;
  std::string out_dir;
  std::string head_mode = "single";
  std::int64_t epochs = 300;
  double lr = 1e-4;
  std::int64_t batch_size = 32;
  std::string aug_config;
  bool no_augment = false;
  std::string resume;
  std::optional<double> stop_at;
  std::optional<double> clip_norm;
  std::int64_t cache_limit = 4096;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.batch_size = a.batch_size;
  cfg.epochs = a.epochs;
  cfg.seed = a.data.seed;
  cfg.head_mode = parse_head_mode(a.head_mode);
  cfg.augment = !a.no_augment;
  if (!a.aug_config.empty()) cfg.augmentation = parse_augmentation_config(read_file(a.aug_config));
  cfg.checkpoint_dir = fs::path(a.out_dir);
  cfg.stop_at_train_accuracy = a.stop_at;
  cfg.clip_norm = a.clip_norm;
  cfg.cache_limit = a.cache_limit;
  cfg.validate();

  DatasetManifest manifest = open_manifest(a.data, err);
  std::optional<DiRecNetV2> model;
  if (!a.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(a.resume);
    if (ck.info.class_names != manifest.vocabulary.names()) {
      throw ConfigError("resume checkpoint vocabulary differs from the manifest");
    }
    cfg.first_epoch = ck.info.epoch + 1;
    cfg.channel_stats = ck.info.channel_stats;
    model.emplace(std::move(ck.model));
    err << "resuming from epoch " << ck.info.epoch << " (optimizer moments start fresh)\n";
  } else {
    ModelConfig mc;
    mc.head_mode = cfg.head_mode;
    mc.num_classes = static_cast<std::int64_t>(manifest.vocabulary.size());
    model.emplace(DiRecNetV2::build(mc, cfg.seed));
  }
  fs::create_directories(a.out_dir);
  write_file_atomic(fs::path(a.out_dir) / "manifest.tsv", format_manifest(manifest));

  TrainLogger logger;
  if (!a.quiet) logger = [&err](const std::string& line) { err << line << "\n" << std::flush; };
  const TrainResult r = train(*model, manifest, cfg, logger);
  const auto& last = r.log.epochs.back();
  char buf[256];
  std::snprintf(buf, sizeof buf, "epochs %zu  best epoch %lld  best val_acc %.4f  last train_acc %.4f\n",
                r.log.epochs.size(), static_cast<long long>(r.log.best_epoch), r.best_validation_accuracy,
                last.train_accuracy);
  out << buf;
  if (r.best_checkpoint) out << "best checkpoint: " << r.best_checkpoint->string() << "\n";
  if (r.last_checkpoint) out << "last checkpoint: " << r.last_checkpoint->string() << "\n";
  return kExitOk;
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  CommonData data;
  std::string checkpoint;
  std::string split = "test";
  std::string mode;
  double threshold = 0.5;
  std::string classes;
  std::string report;
  std::int64_t batch_size = 32;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  DatasetManifest manifest = open_manifest(a.data, err);
  EvaluateOptions opts;
  opts.split = parse_split(a.split);
  opts.mode = a.mode.empty() ? ck.model.config().head_mode : parse_head_mode(a.mode);
  opts.threshold = a.threshold;
  opts.classes = split_csv(a.classes);
  opts.batch_size = a.batch_size;
  if (!opts.classes.empty() && opts.mode == HeadMode::single) {
    throw UsageError("--classes only applies to --mode multi");
  }
  const MetricsReport report = evaluate(ck, manifest, opts);
  const std::string csv = metrics_csv(report);
  out << csv;
  if (!a.report.empty()) write_report_pair(a.report, csv, metrics_json(report));
  return kExitOk;
}

// ---- predict -----------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> images;
  std::string mode;
  double threshold = 0.5;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&) {
  LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  if (!ck.info.channel_stats) throw StateError("checkpoint has no channel statistics");
  const HeadMode mode = a.mode.empty() ? ck.model.config().head_mode : parse_head_mode(a.mode);
  auto names = ck.info.class_names;
  if (names.empty()) {
    for (std::int64_t i = 0; i < ck.model.config().num_classes; ++i) names.push_back("class" + std::to_string(i));
  }
  const auto size = ck.model.config().input_height;
  char buf[128];
  for (const auto& path : a.images) {
    const Tensor x = stack_images({preprocess(decode_image(path), *ck.info.channel_stats, size)});
    const Tensor probs = ck.model.classify(x);
    const auto p = probs.data();
    out << path << "\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::snprintf(buf, sizeof buf, "  %-16s %.4f\n", names[k].c_str(), double(p[k]));
      out << buf;
    }
    std::vector<std::string> assigned;
    if (mode == HeadMode::single) {
      assigned.push_back(names[argmax(p)]);
    } else {
      for (std::size_t k = 0; k < names.size(); ++k) {
        if (double(p[k]) > a.threshold) assigned.push_back(names[k]);
      }
    }
    out << "  labels:";
    if (assigned.empty()) out << " (none)";
    for (const auto& n : assigned) out << " " << n;
    out << "\n";
  }
  return kExitOk;
}

// ---- bench -------------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint;
  BenchOptions options;
  std::uint64_t seed = 0;
  std::string json;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream&) {
  a.options.validate();
  std::optional<DiRecNetV2> model;
  std::string name = "DiRecNetV2";
  if (!a.checkpoint.empty()) {
    model.emplace(load_checkpoint(a.checkpoint).model);
    name = fs::path(a.checkpoint).filename().string();
  } else {
    model.emplace(DiRecNetV2::build(ModelConfig{}, a.seed));
  }
  const BenchResult r = measure_model_fps(*model, a.options, steady_seconds, a.seed, name);
  char buf[256];
  std::snprintf(buf, sizeof buf, "model %s  batch %lld  iterations %lld x %lld  fps %.2f  cv %.2f%%\n",
                r.model.c_str(), static_cast<long long>(a.options.batch_size),
                static_cast<long long>(a.options.iterations), static_cast<long long>(a.options.repeats), r.fps,
                100 * r.cv);
  out << buf;
  if (!a.json.empty()) write_file_atomic(a.json, bench_json(r));
  return kExitOk;
}

// ---- score -------------------------------------------------------------------

struct ScoreArgs {
  std::string rows;
  std::string lambdas = "0.5,0.7,0.3";
  double c = 1e27;
  double f1_scale = 100;
  std::string sort;
  bool ascending = false;
  std::string report;
};

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream&) {
  ScoringConfig cfg;
  cfg.lambdas.clear();
  for (const auto& l : split_csv(a.lambdas)) cfg.lambdas.push_back(parse_double(l, "--lambda"));
  cfg.c = a.c;
  cfg.f1_exponent_scale = a.f1_scale;
  ScoreTable table = build_score_table(parse_score_rows(read_file(a.rows)), cfg);
  if (!a.sort.empty()) table.sort_by(a.sort, !a.ascending);
  const std::string csv = score_table_csv(table);
  out << csv;
  if (!a.report.empty()) write_report_pair(a.report, csv, score_table_json(table));
  return kExitOk;
}

// ---- synth-fixture -------------------------------------------------------------

struct FixtureArgs {
  std::string out_dir;
  std::int64_t train_per_class = 8;
  std::int64_t val_per_class = 2;
  std::int64_t test_per_class = 2;
  std::int64_t size = 32;
  std::uint64_t seed = 0;
};

int cmd_fixture(const FixtureArgs& a, std::ostream& out, std::ostream&) {
  if (a.train_per_class < 1 || a.val_per_class < 1 || a.test_per_class < 0 || a.size < 1) {
    throw UsageError("fixture counts and size must be positive");
  }
  const auto vocab = LabelVocabulary::disaster_default();
  // One well-separated base color per class.
  const std::uint8_t colors[4][3] = {{200, 40, 40}, {40, 80, 210}, {240, 170, 30}, {60, 180, 70}};
  fs::create_directories(a.out_dir);
  Rng rng(a.seed);
  std::uniform_int_distribution<int> jitter(-12, 12);
  std::string manifest = "# synthetic solid-color fixture\n";
  const std::pair<const char*, std::int64_t> splits[3] = {
      {"train", a.train_per_class}, {"val", a.val_per_class}, {"test", a.test_per_class}};
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    for (const auto& [split, count] : splits) {
      for (std::int64_t i = 0; i < count; ++i) {
        auto ch = [&](int c) { return static_cast<std::uint8_t>(std::clamp(colors[k][c] + jitter(rng), 0, 255)); };
        const std::uint8_t r = ch(0), g = ch(1), b = ch(2);
        const std::string file = std::string(split) + "_" + std::to_string(k) + "_" + std::to_string(i) + ".png";
        write_png(fs::path(a.out_dir) / file, Image::filled(a.size, a.size, r, g, b));
        manifest += file + "\t" + vocab.names()[k] + "\t" + split + "\n";
      }
    }
  }
  write_file_atomic(fs::path(a.out_dir) / "manifest.tsv", manifest);
  out << (fs::path(a.out_dir) / "manifest.tsv").string() << "\n";
  return kExitOk;
}

void add_data_options(CLI::App* cmd, CommonData& d, bool manifest_required) {
  auto* m = cmd->add_option("--manifest", d.manifest, "Dataset manifest (path<TAB>labels[<TAB>split])");
  if (manifest_required) m->required();
  cmd->add_option("--data-root", d.data_root, "Directory that relative image paths resolve against")
      ->envname("DIRECNET_DATA_ROOT");
  cmd->add_option("--seed", d.seed, "Seed for initialization, shuffling, augmentation and split assignment");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DiRecNetV2 disaster-scene classifier: training, evaluation, inference and benchmarking"};
  app.name(args.empty() ? "direcnet" : fs::path(args.front()).filename().string());
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model on a manifest");
  add_data_options(train, train_args.data, true);
  train->add_option("--out-dir", train_args.out_dir, "Directory for checkpoints and the training log")->required();
  train->add_option("--head-mode", train_args.head_mode, "single (softmax) or multi (sigmoid)")
      ->check(CLI::IsMember({"single", "multi"}));
  train->add_option("--epochs", train_args.epochs, "Number of epochs")->check(CLI::PositiveNumber);
  train->add_option("--lr", train_args.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  train->add_option("--batch-size", train_args.batch_size, "Batch size")->check(CLI::PositiveNumber);
  train->add_option("--aug-config", train_args.aug_config, "Augmentation key=value file")->check(CLI::ExistingFile);
  train->add_flag("--no-augment", train_args.no_augment, "Disable augmentation");
  train->add_option("--resume", train_args.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train->add_option("--stop-at-train-accuracy", train_args.stop_at,
                    "End training once an epoch's train accuracy reaches this value");
  train->add_option("--clip-norm", train_args.clip_norm, "Global gradient-norm clipping threshold");
  train->add_option("--cache-limit", train_args.cache_limit, "Images kept decoded in memory");
  train->add_flag("--quiet", train_args.quiet, "No per-epoch progress");

  EvaluateArgs eval_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on one split");
  add_data_options(evaluate_cmd, eval_args.data, true);
  evaluate_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  evaluate_cmd->add_option("--split", eval_args.split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "validation", "test"}));
  evaluate_cmd->add_option("--mode", eval_args.mode, "single or multi (default: the checkpoint's head)")
      ->check(CLI::IsMember({"single", "multi"}));
  evaluate_cmd->add_option("--threshold", eval_args.threshold, "Multi-label assignment threshold")
      ->check(CLI::Range(0.0, 1.0));
  evaluate_cmd->add_option("--classes", eval_args.classes, "Comma-separated class subset (multi mode)");
  evaluate_cmd->add_option("--report", eval_args.report, "Report path; CSV and JSON are both written");
  evaluate_cmd->add_option("--batch-size", eval_args.batch_size, "Inference batch size")->check(CLI::PositiveNumber);

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Classify images");
  predict->add_option("--checkpoint", predict_args.checkpoint, "Checkpoint file")->required();
  predict->add_option("--image", predict_args.images, "Image file (repeatable)")->required();
  predict->add_option("--mode", predict_args.mode, "single or multi (default: the checkpoint's head)")
      ->check(CLI::IsMember({"single", "multi"}));
  predict->add_option("--threshold", predict_args.threshold, "Multi-label assignment threshold")
      ->check(CLI::Range(0.0, 1.0));

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Measure inference throughput");
  bench->add_option("--checkpoint", bench_args.checkpoint, "Checkpoint (default: freshly initialized model)");
  bench->add_option("--batch-size", bench_args.options.batch_size, "Images per forward pass")
      ->check(CLI::PositiveNumber);
  bench->add_option("--warmup", bench_args.options.warmup, "Untimed iterations")->check(CLI::NonNegativeNumber);
  bench->add_option("--iterations", bench_args.options.iterations, "Timed iterations per repeat")
      ->check(CLI::PositiveNumber);
  bench->add_option("--repeats", bench_args.options.repeats, "Repeats")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_args.seed, "Seed for the model and input");
  bench->add_option("--json", bench_args.json, "Write the full result as JSON");

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Speed/accuracy score table from name,weighted_f1,fps rows");
  score->add_option("--rows", score_args.rows, "Rows file")->required()->check(CLI::ExistingFile);
  score->add_option("--lambda", score_args.lambdas, "Comma-separated Score1 weights");
  score->add_option("--c", score_args.c, "Score2 normalization constant");
  score->add_option("--f1-scale", score_args.f1_scale, "Score2 exponent scale on the weighted F1");
  score->add_option("--sort", score_args.sort, "Column to sort by (descending)");
  score->add_flag("--ascending", score_args.ascending, "Sort ascending");
  score->add_option("--report", score_args.report, "Report path; CSV and JSON are both written");

  FixtureArgs fixture_args;
  auto* fixture = app.add_subcommand("synth-fixture", "Write a separable solid-color dataset");
  fixture->add_option("--out-dir", fixture_args.out_dir, "Output directory")->required();
  fixture->add_option("--train-per-class", fixture_args.train_per_class, "Training images per class");
  fixture->add_option("--val-per-class", fixture_args.val_per_class, "Validation images per class");
  fixture->add_option("--test-per-class", fixture_args.test_per_class, "Test images per class");
  fixture->add_option("--size", fixture_args.size, "Image side length");
  fixture->add_option("--seed", fixture_args.seed, "Color jitter seed");

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  if (argv.empty()) argv.push_back("direcnet");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_args, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(eval_args, out, err);
    if (predict->parsed()) return cmd_predict(predict_args, out, err);
    if (bench->parsed()) return cmd_bench(bench_args, out, err);
    if (score->parsed()) return cmd_score(score_args, out, err);
    if (fixture->parsed()) return cmd_fixture(fixture_args, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace direcnet::cli
