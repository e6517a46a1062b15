#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "direcnet/model.hpp"

namespace direcnet {

// Seconds on a monotonic timeline.
using Clock = std::function<double()>;
double steady_seconds();

struct BenchOptions {
  std::int64_t batch_size = 1;
  std::int64_t warmup = 20;
  std::int64_t iterations = 200;  // timed, per repeat
  std::int64_t repeats = 5;

  // Throws ConfigError.
  void validate() const;
};

struct BenchResult {
  std::string model;
  BenchOptions options;
  // One entry per timed iteration, repeats concatenated.
  std::vector<double> latencies;
  std::vector<double> repeat_fps;
  double elapsed = 0;  // summed over repeats
  double fps = 0;      // iterations * repeats * batch_size / elapsed
  // Population standard deviation of repeat_fps over its mean.
  double cv = 0;
};

/// Runs `warmup` untimed calls, then `repeats` blocks of `iterations` timed
/// calls of `run_batch`. The clock is read once before each block and once
/// after every iteration.
BenchResult measure_fps(const std::function<void()>& run_batch, const BenchOptions& options,
                        const Clock& clock = steady_seconds, std::string model_name = {});

/// Eval-mode inference on a fixed random input. Running statistics that
/// were never initialized are reset to mean 0 / variance 1 first.
BenchResult measure_model_fps(DiRecNetV2& model, const BenchOptions& options,
                              const Clock& clock = steady_seconds, std::uint64_t seed = 0,
                              std::string model_name = "DiRecNetV2");

std::string bench_json(const BenchResult& result);

}  // namespace direcnet
