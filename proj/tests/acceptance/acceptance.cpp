// Acceptance gate: one PASS/FAIL line per criterion. Run with
// `--criterion N` (repeatable) to select criteria; all run by default.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "direcnet/bench.hpp"
#include "direcnet/checkpoint.hpp"
#include "direcnet/io.hpp"
#include "direcnet/metrics.hpp"
#include "direcnet/model.hpp"
#include "direcnet/ops.hpp"
#include "direcnet/scoring.hpp"
#include "direcnet/train.hpp"
#include "direcnet_cli/cli.hpp"
#include "oracles.hpp"
#include "reference_tables.hpp"
#include "temp_dir.hpp"

namespace direcnet {
namespace {

using oracle::random_tensor;
using oracle::to_vec;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures while keeping the first few messages.
class Checker {
 public:
  void fail(const std::string& message) {
    ++failures_;
    if (failures_ <= 5) messages_ += (messages_.empty() ? "" : "; ") + message;
  }
  void expect(bool ok, const std::string& message) {
    if (!ok) fail(message);
  }
  Outcome finish(std::string summary) const {
    if (failures_ == 0) return {true, std::move(summary)};
    return {false, summary + "; " + std::to_string(failures_) + " failure(s): " + messages_};
  }

 private:
  int failures_ = 0;
  std::string messages_;
};

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- 1: parameter counts ----------------------------------------------------

Outcome parameter_exactness() {
  Checker c;
  auto model = DiRecNetV2::build({}, 0);
  c.expect(model.parameter_count() == reference::kTotalParameters,
           "total " + std::to_string(model.parameter_count()));
  const auto trace = shape_trace(model, 1);
  const auto& ref = reference::layer_table();
  c.expect(trace.size() == ref.size(), "row count " + std::to_string(trace.size()));
  std::int64_t rows_with_params = 0;
  for (std::size_t i = 0; i < std::min(trace.size(), ref.size()); ++i) {
    if (ref[i].params) ++rows_with_params;
    if (trace[i].params != ref[i].params) {
      c.fail(std::string(ref[i].layer) + " params " + (trace[i].params ? std::to_string(*trace[i].params) : "none"));
    }
  }
  return c.finish("total " + std::to_string(model.parameter_count()) + ", " + std::to_string(rows_with_params) +
                  " per-layer counts compared");
}

// ---- 2: shape trace -----------------------------------------------------------

Outcome shape_trace_exactness() {
  Checker c;
  auto model = DiRecNetV2::build({}, 0);
  const auto trace = shape_trace(model, 32);
  const auto& ref = reference::layer_table();
  c.expect(trace.size() == ref.size(), "row count " + std::to_string(trace.size()));
  for (std::size_t i = 0; i < std::min(trace.size(), ref.size()); ++i) {
    c.expect(trace[i].layer == ref[i].layer, "row " + std::to_string(i) + " layer " + trace[i].layer);
    c.expect(trace[i].depth == ref[i].depth, "row " + std::to_string(i) + " depth");
    c.expect(trace[i].input == ref[i].input, std::string(ref[i].layer) + " input " + shape_str(trace[i].input));
    c.expect(trace[i].output == ref[i].output, std::string(ref[i].layer) + " output " + shape_str(trace[i].output));
  }
  return c.finish(std::to_string(trace.size()) + " rows at batch 32");
}

// ---- 3: gradients ---------------------------------------------------------------

ops::AttentionParams<double> random_attention(std::int64_t d, std::mt19937_64& rng) {
  return {random_tensor<double>({d, d}, rng), random_tensor<double>({d}, rng),
          random_tensor<double>({d, d}, rng), random_tensor<double>({d}, rng),
          random_tensor<double>({d, d}, rng), random_tensor<double>({d}, rng),
          random_tensor<double>({d, d}, rng), random_tensor<double>({d}, rng)};
}

EncoderBlockParams<double> random_block(std::int64_t d, std::int64_t hidden, std::mt19937_64& rng) {
  EncoderBlockParams<double> b;
  b.attn_norm = {random_tensor<double>({d}, rng, 0.5, 1.5), random_tensor<double>({d}, rng)};
  b.attn = random_attention(d, rng);
  b.mlp_norm = {random_tensor<double>({d}, rng, 0.5, 1.5), random_tensor<double>({d}, rng)};
  b.fc1 = {random_tensor<double>({hidden, d}, rng), random_tensor<double>({hidden}, rng)};
  b.fc2 = {random_tensor<double>({d, hidden}, rng), random_tensor<double>({d}, rng)};
  return b;
}

ModelConfig reduced_model_config() {
  ModelConfig cfg;
  cfg.input_height = cfg.input_width = 16;
  cfg.embed_dim = 8;
  cfg.num_heads = 2;
  cfg.num_encoder_blocks = 1;
  cfg.mlp_dim = 8;
  cfg.conv_widths = {4, 4, 4, 4, 4, 4, 4};
  cfg.dropout_embed = cfg.dropout_head = 0;
  return cfg;
}

Outcome gradient_correctness() {
  constexpr double kPrimitiveTolerance = 1e-5;
  constexpr double kEndToEndTolerance = 1e-4;
  Checker c;
  std::mt19937_64 rng(2024);
  double worst = 0;
  std::string worst_name;
  auto check = [&](const std::string& name, std::vector<Tensor64> inputs,
                   const std::function<Tensor64(Tape64&)>& loss) {
    const auto r = oracle::gradient_check(std::move(inputs), loss);
    if (r.max_relative_error > worst) worst = r.max_relative_error, worst_name = name;
    std::ostringstream msg;
    msg << name << " " << r;
    c.expect(r.max_relative_error < kPrimitiveTolerance, msg.str());
  };
  auto weighted = [&](Shape s) { return random_tensor<double>(std::move(s), rng); };

  for (int trial = 0; trial < 3; ++trial) {
    {
      auto x = weighted({2, 2, 6, 5}), w = weighted({3, 2, 3, 3}), b = weighted({3}), r = weighted({2, 3, 6, 5});
      check("conv2d", {x, w, b}, [&](Tape64& t) {
        return oracle::weighted_sum(t, ops::conv2d(t, x, w, b, {.padding = 1, .relu = trial % 2 == 1}), r);
      });
    }
    {
      auto x = weighted({1, 2, 7, 8}), w = weighted({2, 2, 7, 7}), b = weighted({2}), r = weighted({1, 2, 4, 4});
      check("conv2d 7x7 stride 2", {x, w, b}, [&](Tape64& t) {
        return oracle::weighted_sum(t, ops::conv2d(t, x, w, b, {.stride = 2, .padding = 3}), r);
      });
    }
    {
      auto x = weighted({2, 3, 5, 4}), w = weighted({3, 1, 3, 3}), b = weighted({3}), r = weighted({2, 3, 5, 4});
      check("depthwise", {x, w, b},
            [&](Tape64& t) { return oracle::weighted_sum(t, ops::depthwise_conv2d(t, x, w, b, true), r); });
    }
    {
      auto x = weighted({2, 4, 3, 3}), w = weighted({5, 4, 1, 1}), b = weighted({5}), r = weighted({2, 5, 3, 3});
      check("pointwise", {x, w, b},
            [&](Tape64& t) { return oracle::weighted_sum(t, ops::pointwise_conv2d(t, x, w, b), r); });
    }
    {
      auto x = weighted({3, 2, 3, 3});
      auto state = BatchNormState<double>::create(2);
      state.gamma = random_tensor<double>({2}, rng, 0.5, 1.5);
      state.beta = weighted({2});
      auto r = weighted({3, 2, 3, 3});
      check("batch norm", {x, state.gamma, state.beta},
            [&](Tape64& t) { return oracle::weighted_sum(t, ops::batch_norm2d(t, x, state, Mode::train), r); });
    }
    {
      auto x = weighted({2, 2, 6, 8}), r = weighted({2, 2, 3, 4});
      check("max pool", {x}, [&](Tape64& t) { return oracle::weighted_sum(t, ops::max_pool2d(t, x), r); });
    }
    {
      auto x = weighted({2, 3, 6}), w = weighted({5, 6}), b = weighted({5}), r = weighted({2, 3, 5});
      check("linear", {x, w, b}, [&](Tape64& t) { return oracle::weighted_sum(t, ops::linear(t, x, w, b), r); });
    }
    {
      auto x = weighted({4, 8}), g = weighted({8}), b = weighted({8}), r = weighted({4, 8});
      check("layer norm", {x, g, b},
            [&](Tape64& t) { return oracle::weighted_sum(t, ops::layer_norm(t, x, g, b), r); });
    }
    {
      auto z = random_tensor<double>({4, 5}, rng, -2, 2);
      Tensor64 y({4, 5});
      for (int i = 0; i < 4; ++i) y.data()[i * 5 + (i + trial) % 5] = 1;
      check("softmax+cce", {z}, [&](Tape64& t) { return ops::categorical_cross_entropy(t, y, ops::softmax(t, z)); });
    }
    {
      auto z = random_tensor<double>({3, 4}, rng, -3, 3);
      Tensor64 y({3, 4});
      std::bernoulli_distribution coin(0.5);
      for (auto& v : y.data()) v = coin(rng);
      check("sigmoid+bce", {z}, [&](Tape64& t) { return ops::binary_cross_entropy(t, y, ops::sigmoid(t, z)); });
    }
    {
      auto x = weighted({2, 4, 6});
      auto p = random_attention(6, rng);
      auto r = weighted({2, 4, 6});
      check("attention", {x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo},
            [&](Tape64& t) { return oracle::weighted_sum(t, ops::multi_head_self_attention(t, x, p, 2), r); });
    }
    {
      auto x = weighted({2, 3, 4});
      auto b = random_block(4, 8, rng);
      auto r = weighted({2, 3, 4});
      check("encoder block",
            {x, b.attn_norm.gamma, b.attn_norm.beta, b.attn.wq, b.attn.bq, b.attn.wk, b.attn.bk, b.attn.wv,
             b.attn.bv, b.attn.wo, b.attn.bo, b.mlp_norm.gamma, b.mlp_norm.beta, b.fc1.weight, b.fc1.bias,
             b.fc2.weight, b.fc2.bias},
            [&](Tape64& t) { return oracle::weighted_sum(t, encoder_block(t, x, b, 2, 1e-6), r); });
    }
  }

  // End to end. Parameters are moved off their initial values so zero biases
  // do not sit exactly on ReLU kinks; entries whose finite differences still
  // straddle a kink are detected and skipped.
  auto model = DiRecNetV2Double::build(reduced_model_config(), 32);
  model.set_mode(Mode::train);
  std::mt19937_64 jitter_rng(33);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  for (const auto& p : model.parameters()) {
    auto handle = p.tensor;
    for (auto& v : handle.data()) v += jitter(jitter_rng);
  }
  auto images = random_tensor<double>({2, 3, 16, 16}, jitter_rng);
  Tensor64 labels({2, 4}, {1, 0, 0, 0, 0, 0, 1, 0});
  std::vector<Tensor64> inputs{images};
  for (const auto& p : model.parameters()) inputs.push_back(p.tensor);
  const auto e2e = oracle::gradient_check(
      inputs, [&](Tape64& t) { return ops::categorical_cross_entropy(t, labels, model.classify(t, images)); },
      {.detect_kinks = true, .kink_tolerance = 1e-6});
  std::ostringstream msg;
  msg << "end-to-end " << e2e;
  c.expect(e2e.max_relative_error < kEndToEndTolerance, msg.str());
  c.expect(e2e.skipped * 10 < e2e.checked, "too many kink skips: " + msg.str());

  return c.finish("primitives max rel err " + fmt("%.2e", worst) + " (" + worst_name + "), end-to-end " +
                  fmt("%.2e", e2e.max_relative_error) + " over " + std::to_string(e2e.checked) + " entries (" +
                  std::to_string(e2e.skipped) + " kink-skipped)");
}

// ---- 4: forward oracles -----------------------------------------------------------

Outcome oracle_equivalence() {
  constexpr double kForwardTolerance = 1e-6;
  constexpr double kF1Tolerance = 1e-9;
  Checker c;
  std::mt19937_64 rng(4004);
  Tape64 tape(false);
  double worst = 0;
  int conv_cases = 0, attention_cases = 0, pool_cases = 0;
  auto record = [&](const char* what, int instance, double diff) {
    worst = std::max(worst, diff);
    c.expect(diff < kForwardTolerance, std::string(what) + " instance " + std::to_string(instance) + " diff " +
                                           fmt("%.3e", diff));
  };
  for (int i = 0; i < 200; ++i) {
    std::uniform_int_distribution<int> ext(1, 8), chan(1, 4), kind(0, 2);
    switch (kind(rng)) {
      case 0: {
        ++conv_cases;
        std::uniform_int_distribution<int> kidx(0, 2), strd(1, 2), grouped(0, 1);
        const std::int64_t k = std::array{3, 5, 7}[kidx(rng)];
        const std::int64_t n = chan(rng), h = ext(rng), w = ext(rng);
        if (grouped(rng)) {
          const std::int64_t ch = chan(rng);
          auto x = random_tensor<double>({n, ch, h, w}, rng);
          auto wt = random_tensor<double>({ch, 1, 3, 3}, rng);
          auto b = random_tensor<double>({ch}, rng);
          auto y = ops::depthwise_conv2d(tape, x, wt, b);
          record("depthwise", i,
                 oracle::max_abs_diff(to_vec(y), oracle::conv2d(to_vec(x), n, ch, h, w, to_vec(wt), ch, 3,
                                                                to_vec(b), 1, 1, ch)));
        } else {
          const std::int64_t cin = chan(rng), cout = chan(rng), stride = strd(rng);
          auto x = random_tensor<double>({n, cin, h, w}, rng);
          auto wt = random_tensor<double>({cout, cin, k, k}, rng);
          auto b = random_tensor<double>({cout}, rng);
          auto y = ops::conv2d(tape, x, wt, b, {.stride = stride, .padding = k / 2});
          record("conv2d", i,
                 oracle::max_abs_diff(to_vec(y), oracle::conv2d(to_vec(x), n, cin, h, w, to_vec(wt), cout, k,
                                                                to_vec(b), stride, k / 2)));
        }
        break;
      }
      case 1: {
        ++attention_cases;
        std::uniform_int_distribution<int> hd(1, 4), hs(1, 3);
        const std::int64_t n = hs(rng), t = ext(rng), heads = hs(rng), d = heads * hd(rng);
        auto x = random_tensor<double>({n, t, d}, rng, -2, 2);
        auto p = random_attention(d, rng);
        auto y = ops::multi_head_self_attention(tape, x, p, heads);
        const oracle::AttentionWeights ow{to_vec(p.wq), to_vec(p.bq), to_vec(p.wk), to_vec(p.bk),
                                          to_vec(p.wv), to_vec(p.bv), to_vec(p.wo), to_vec(p.bo)};
        record("attention", i, oracle::max_abs_diff(to_vec(y), oracle::self_attention(to_vec(x), n, t, d, heads, ow)));
        break;
      }
      default: {
        ++pool_cases;
        std::uniform_int_distribution<int> half(1, 4);
        const std::int64_t n = chan(rng), ch = chan(rng), h = 2 * half(rng), w = 2 * half(rng);
        auto x = random_tensor<double>({n, ch, h, w}, rng);
        auto y = ops::max_pool2d(tape, x);
        record("max pool", i, oracle::max_abs_diff(to_vec(y), oracle::max_pool(to_vec(x), n * ch, h, w)));
      }
    }
  }

  double worst_f1 = 0;
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<int> size(1, 50), classes(1, 5);
    const int n = size(rng), k = classes(rng);
    std::uniform_int_distribution<int> label(0, k - 1);
    std::uniform_real_distribution<double> unit(0, 1);
    std::vector<std::int64_t> truth(static_cast<std::size_t>(n));
    std::vector<int> truth_i(truth.size()), predicted(truth.size());
    std::vector<double> probs(static_cast<std::size_t>(n * k));
    for (int r = 0; r < n; ++r) {
      truth[r] = truth_i[r] = label(rng);
      for (int j = 0; j < k; ++j) probs[r * k + j] = unit(rng);
      predicted[r] = int(std::max_element(probs.begin() + r * k, probs.begin() + (r + 1) * k) - (probs.begin() + r * k));
    }
    const auto report = single_label_metrics<double>(truth, probs, k);
    const double diff = std::abs(report.weighted_f1 - oracle::weighted_f1_bruteforce(truth_i, predicted, k));
    worst_f1 = std::max(worst_f1, diff);
    c.expect(diff < kF1Tolerance, "weighted F1 instance " + std::to_string(i) + " diff " + fmt("%.3e", diff));
  }
  return c.finish(std::to_string(conv_cases) + " conv, " + std::to_string(attention_cases) + " attention, " +
                  std::to_string(pool_cases) + " pooling instances, max diff " + fmt("%.2e", worst) +
                  "; 1000 weighted F1 instances, max diff " + fmt("%.2e", worst_f1));
}

// ---- 5: score table -----------------------------------------------------------------

Outcome score_reproduction() {
  constexpr double kScore1Tolerance = 0.001;
  constexpr double kScore2RelativeTolerance = 0.02;
  Checker c;
  std::vector<ScoreRow> rows;
  for (const auto& ref : reference::score_table()) {
    const double fps = reference::fps_of(ref.model);
    if (fps < 0) {
      c.fail(std::string("no throughput for ") + ref.model);
      continue;
    }
    rows.push_back({ref.model, ref.weighted_f1, fps});
  }
  const auto table = build_score_table(rows);
  double worst1 = 0, worst2 = 0;
  int ok1 = 0, ok2 = 0, cells1 = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& got = table.rows[i];
    const auto& ref = reference::score_table()[i];
    for (std::size_t l = 0; l < 3; ++l) {
      ++cells1;
      const double diff = std::abs(got.score1[l] - ref.score1[l]);
      worst1 = std::max(worst1, diff);
      if (diff <= kScore1Tolerance) {
        ++ok1;
      } else {
        c.fail(std::string(ref.model) + " score1[" + fmt("%.1f", table.lambdas[l]) + "] " + fmt("%.4f", got.score1[l]) +
               " vs " + fmt("%.3f", ref.score1[l]));
      }
    }
    const double rel = std::abs(got.score2 - ref.score2) / ref.score2;
    worst2 = std::max(worst2, rel);
    if (rel <= kScore2RelativeTolerance) {
      ++ok2;
    } else {
      c.fail(std::string(ref.model) + " score2 " + fmt("%.2f", got.score2) + " vs " + fmt("%.2f", ref.score2));
    }
  }
  return c.finish(std::to_string(ok1) + "/" + std::to_string(cells1) + " Score1 cells within 0.001 (max err " +
                  fmt("%.4f", worst1) + "), " + std::to_string(ok2) + "/" + std::to_string(table.rows.size()) +
                  " Score2 cells within 2% (max err " + fmt("%.2f%%", 100 * worst2) + ")");
}

// ---- 6: per-class F1 arithmetic --------------------------------------------------

Outcome multilabel_arithmetic() {
  constexpr double kTolerance = 0.001;
  Checker c;
  int cells = 0, ok = 0, averages_ok = 0;
  const auto& table = reference::multilabel_table();
  for (const auto& row : table) {
    double sum = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& [p, r, f1] = row.classes[k];
      const double got = f1_from_pr(p, r);
      sum += got;
      ++cells;
      if (std::abs(got - f1) <= kTolerance) {
        ++ok;
      } else {
        c.fail(std::string(row.model) + " class " + std::to_string(k) + " F1 " + fmt("%.4f", got) + " vs " + fmt("%.3f", f1));
      }
    }
    const double avg = sum / 3;
    if (std::abs(avg - row.average) <= kTolerance) {
      ++averages_ok;
    } else {
      c.fail(std::string(row.model) + " average " + fmt("%.4f", avg) + " vs " + fmt("%.3f", row.average));
    }
  }
  return c.finish(std::to_string(ok) + "/" + std::to_string(cells) + " per-class cells and " +
                  std::to_string(averages_ok) + "/" + std::to_string(table.size()) + " averages within 0.001");
}

// ---- 7 and 8: training through the command line ---------------------------------

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "direcnet");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path make_fixture(const testing::TempDir& dir) {
  const auto r = run_cli({"synth-fixture", "--out-dir", (dir / "data").string(), "--train-per-class", "8",
                          "--val-per-class", "2", "--test-per-class", "2", "--seed", "7"});
  if (r.code != 0) throw std::runtime_error("synth-fixture failed: " + r.err);
  return dir / "data" / "manifest.tsv";
}

Outcome training_sanity() {
  constexpr double kTarget = 0.95;
  constexpr double kBudgetSeconds = 600;
  Checker c;
  testing::TempDir dir("acceptance_train");
  const auto manifest = make_fixture(dir);
  const auto start = std::chrono::steady_clock::now();
  auto train_once = [&](const std::string& out) {
    return run_cli({"train", "--manifest", manifest.string(), "--out-dir", (dir / out).string(), "--epochs", "200",
                    "--seed", "1", "--stop-at-train-accuracy", fmt("%g", kTarget), "--quiet"});
  };
  const auto first = train_once("run1");
  const double elapsed = seconds_since(start);
  c.expect(first.code == 0, "train exited " + std::to_string(first.code) + ": " + first.err);
  if (first.code != 0) return c.finish("training failed");

  const auto log = read_file(dir / "run1" / "train_log.csv");
  std::istringstream lines(log);
  std::string line, last;
  std::int64_t epochs = 0;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    if (!line.empty()) last = line, ++epochs;
  }
  std::vector<std::string> fields;
  std::stringstream ls(last);
  for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
  const double train_accuracy = fields.size() > 2 ? std::stod(fields[2]) : 0;
  c.expect(train_accuracy >= kTarget, "final train accuracy " + fmt("%.4f", train_accuracy));
  c.expect(epochs <= 200, "epochs " + std::to_string(epochs));
  c.expect(elapsed < kBudgetSeconds, "took " + fmt("%.1f s", elapsed));

  const auto second = train_once("run2");
  c.expect(second.code == 0, "second run exited " + std::to_string(second.code));
  c.expect(read_file(dir / "run1" / "last.ckpt") == read_file(dir / "run2" / "last.ckpt"),
           "repeat run produced a different final checkpoint");
  return c.finish("train accuracy " + fmt("%.4f", train_accuracy) + " after " + std::to_string(epochs) +
                  " epoch(s) in " + fmt("%.1f s", elapsed) + ", repeat run identical");
}

Outcome determinism() {
  Checker c;
  testing::TempDir dir("acceptance_determinism");
  const auto manifest = make_fixture(dir);
  std::vector<std::string> bytes;
  for (const char* out : {"a", "b"}) {
    const auto r = run_cli({"train", "--manifest", manifest.string(), "--out-dir", (dir / out).string(),
                            "--epochs", "2", "--seed", "5", "--quiet"});
    c.expect(r.code == 0, std::string("run ") + out + " exited " + std::to_string(r.code) + ": " + r.err);
    if (r.code != 0) return c.finish("training failed");
    bytes.push_back(read_file(dir / out / "best.ckpt"));
  }
  c.expect(bytes[0] == bytes[1], "best checkpoints differ");

  // Round trip: load, re-save, compare bytes and forward outputs.
  auto loaded = load_checkpoint(dir / "a" / "best.ckpt");
  save_checkpoint(loaded.model, loaded.info, dir / "resaved.ckpt");
  c.expect(read_file(dir / "resaved.ckpt") == bytes[0], "re-saved checkpoint differs");
  auto again = load_checkpoint(dir / "resaved.ckpt");
  std::mt19937_64 rng(8);
  const auto input = random_tensor<float>({2, 3, 224, 224}, rng);
  const auto y1 = loaded.model.classify(input);
  const auto y2 = again.model.classify(input);
  c.expect(std::memcmp(y1.data().data(), y2.data().data(), y1.data().size_bytes()) == 0,
           "forward outputs differ after reload");
  for (std::size_t i = 0; i < loaded.model.parameters().size(); ++i) {
    const auto a = loaded.model.parameters()[i].tensor.data();
    const auto b = again.model.parameters()[i].tensor.data();
    if (std::memcmp(a.data(), b.data(), a.size_bytes()) != 0) c.fail(loaded.model.parameters()[i].name + " differs");
  }
  return c.finish("two seeded runs byte-identical (" + std::to_string(bytes[0].size()) +
                  " bytes), save/load round trip exact");
}

// ---- 9: throughput harness ------------------------------------------------------

Outcome fps_harness() {
  constexpr double kMaxCv = 0.10;
  Checker c;
  // Dyadic steps keep every clock reading exact, so the expected values are
  // exact too.
  for (const auto& [step, iterations, repeats, batch] :
       std::vector<std::tuple<double, std::int64_t, std::int64_t, std::int64_t>>{
           {1.0 / 256, 100, 5, 1}, {1.0 / 64, 16, 3, 4}, {0.5, 7, 2, 32}}) {
    double now = 1024;
    BenchOptions o;
    o.warmup = 2;
    o.iterations = iterations;
    o.repeats = repeats;
    o.batch_size = batch;
    const auto r = measure_fps([] {}, o, [&] { return std::exchange(now, now + step); });
    const double expected = double(batch) / step;
    c.expect(r.fps == expected, "fake clock fps " + fmt("%.17g", r.fps) + " vs " + fmt("%.17g", expected));
    c.expect(r.cv == 0, "fake clock cv " + fmt("%g", r.cv));
  }

  auto model = DiRecNetV2::build({}, 0);
  BenchOptions o;
  o.warmup = 5;
  o.iterations = 20;
  o.repeats = 5;
  const auto r = measure_model_fps(model, o);
  c.expect(r.cv < kMaxCv, "real-clock cv " + fmt("%.2f%%", 100 * r.cv));
  return c.finish("fake clock exact; default model batch 1: " + fmt("%.2f fps", r.fps) + ", cv " +
                  fmt("%.2f%%", 100 * r.cv) + " over 5 repeats");
}

// ---- 10: loss and activation spot values ---------------------------------------------

Outcome spot_values() {
  constexpr double kTolerance = 1e-7;
  Checker c;
  Tape64 tape(false);
  double worst = 0;
  auto compare = [&](const std::string& what, double got, long double expected) {
    const double diff = double(std::fabs((long double)got - expected));
    worst = std::max(worst, diff);
    c.expect(diff <= kTolerance, what + " " + fmt("%.10g", got) + " vs " + fmt("%.10g", double(expected)));
  };

  const auto sm = ops::softmax(tape, Tensor64({1, 3}, {1, 2, 3}));
  const auto ref = oracle::softmax({1.0L, 2.0L, 3.0L});
  for (std::size_t i = 0; i < 3; ++i) compare("softmax[" + std::to_string(i) + "]", sm.data()[i], ref[i]);

  // Probabilities are clamped to [1e-7, 1 - 1e-7] before the logarithm.
  const long double lo = 1e-7L;
  compare("cce perfect", ops::categorical_cross_entropy(tape, Tensor64({1, 4}, {1, 0, 0, 0}),
                                                        Tensor64({1, 4}, {1, 0, 0, 0})).item(),
          -std::log(1 - lo));
  compare("cce uniform", ops::categorical_cross_entropy(tape, Tensor64({1, 4}, {1, 0, 0, 0}),
                                                        Tensor64::full({1, 4}, 0.25)).item(),
          std::log(4.0L));
  compare("cce batch mean", ops::categorical_cross_entropy(tape, Tensor64({2, 2}, {1, 0, 0, 1}),
                                                           Tensor64({2, 2}, {0.7, 0.3, 0.6, 0.4})).item(),
          (-std::log(0.7L) - std::log(0.4L)) / 2);
  compare("bce perfect", ops::binary_cross_entropy(tape, Tensor64({1, 2}, {1, 0}),
                                                   Tensor64({1, 2}, {1 - 1e-7, 1e-7})).item(),
          -std::log(1 - lo));
  compare("bce positive half", ops::binary_cross_entropy(tape, Tensor64({1, 1}, std::vector<double>{1}),
                                                         Tensor64({1, 1}, std::vector<double>{0.5})).item(),
          std::log(2.0L));
  compare("bce negative half", ops::binary_cross_entropy(tape, Tensor64({1, 1}, std::vector<double>{0}),
                                                         Tensor64({1, 1}, std::vector<double>{0.5})).item(),
          std::log(2.0L));
  return c.finish("softmax([1,2,3]) = [" + fmt("%.7f", sm.data()[0]) + ", " + fmt("%.7f", sm.data()[1]) + ", " +
                  fmt("%.7f", sm.data()[2]) + "], max diff " + fmt("%.2e", worst));
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "parameter exactness", parameter_exactness},
    {2, "shape trace exactness", shape_trace_exactness},
    {3, "gradient correctness", gradient_correctness},
    {4, "oracle equivalence", oracle_equivalence},
    {5, "score table reproduction", score_reproduction},
    {6, "multi-label F1 arithmetic", multilabel_arithmetic},
    {7, "training sanity", training_sanity},
    {8, "determinism", determinism},
    {9, "fps harness validity", fps_harness},
    {10, "loss/activation spot values", spot_values},
};

}  // namespace
}  // namespace direcnet

int main(int argc, char** argv) {
  CLI::App app("DiRecNetV2 acceptance criteria");
  std::vector<int> selected;
  app.add_option("--criterion,-c", selected, "Criterion number (repeatable); all when omitted")
      ->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& criterion : direcnet::kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), criterion.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    direcnet::Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && outcome.pass;
    std::printf("criterion %2d %s: %s [%.1f s] %s\n", criterion.id, outcome.pass ? "PASS" : "FAIL", criterion.name,
                direcnet::seconds_since(start), outcome.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
