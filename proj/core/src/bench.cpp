#include "direcnet/bench.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "direcnet/error.hpp"

namespace direcnet {

double steady_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void BenchOptions::validate() const {
  if (batch_size < 1) throw ConfigError("bench: batch size must be >= 1");
  if (warmup < 0) throw ConfigError("bench: warmup must be >= 0");
  if (iterations < 1) throw ConfigError("bench: iterations must be >= 1");
  if (repeats < 1) throw ConfigError("bench: repeats must be >= 1");
}

BenchResult measure_fps(const std::function<void()>& run_batch, const BenchOptions& options,
                        const Clock& clock, std::string model_name) {
  options.validate();
  BenchResult r;
  r.model = std::move(model_name);
  r.options = options;
  for (std::int64_t i = 0; i < options.warmup; ++i) run_batch();
  const double frames = double(options.iterations * options.batch_size);
  for (std::int64_t rep = 0; rep < options.repeats; ++rep) {
    const double start = clock();
    double last = start;
    for (std::int64_t i = 0; i < options.iterations; ++i) {
      run_batch();
      const double now = clock();
      r.latencies.push_back(now - last);
      last = now;
    }
    const double elapsed = last - start;
    if (!(elapsed > 0)) throw StateError("bench: clock did not advance during a repeat");
    r.elapsed += elapsed;
    r.repeat_fps.push_back(frames / elapsed);
  }
  r.fps = frames * double(options.repeats) / r.elapsed;
  const double mean = std::accumulate(r.repeat_fps.begin(), r.repeat_fps.end(), 0.0) / double(r.repeat_fps.size());
  double var = 0;
  for (double f : r.repeat_fps) var += (f - mean) * (f - mean);
  var /= double(r.repeat_fps.size());
  r.cv = std::sqrt(var) / mean;
  return r;
}

BenchResult measure_model_fps(DiRecNetV2& model, const BenchOptions& options, const Clock& clock,
                              std::uint64_t seed, std::string model_name) {
  options.validate();
  const ModelConfig& c = model.config();
  Tensor input({options.batch_size, c.input_channels, c.input_height, c.input_width});
  Rng rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : input.data()) v = dist(rng);

  for (auto& [name, bn] : model.batch_norms()) {
    if (!bn->has_running_stats) bn->reset_running_stats();
  }
  const Mode previous = model.mode();
  model.set_mode(Mode::eval);
  BenchResult r;
  try {
    r = measure_fps([&] { (void)model.classify(input); }, options, clock, std::move(model_name));
  } catch (...) {
    model.set_mode(previous);
    throw;
  }
  model.set_mode(previous);
  return r;
}

std::string bench_json(const BenchResult& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["batch_size"] = r.options.batch_size;
  j["warmup"] = r.options.warmup;
  j["iterations"] = r.options.iterations;
  j["repeats"] = r.options.repeats;
  j["elapsed_seconds"] = r.elapsed;
  j["fps"] = r.fps;
  j["repeat_fps"] = r.repeat_fps;
  j["cv"] = r.cv;
  j["latencies"] = r.latencies;
  return j.dump(2) + "\n";
}

}  // namespace direcnet
