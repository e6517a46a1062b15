#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "direcnet/tensor.hpp"

namespace direcnet {

template <typename T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> tensor;
};

using Parameter = BasicParameter<float>;

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global-norm gradient clipping; disabled unless set.
  std::optional<double> clip_norm;
};

/// Adam with bias correction. Moment buffers are kept per parameter in
/// the parameter's precision; the update arithmetic runs in double.
template <typename T>
class BasicAdam {
 public:
  BasicAdam(std::vector<BasicParameter<T>> params, AdamOptions options);

  // Throws StateError naming the first parameter without a gradient.
  void step();
  void zero_grad();

  std::int64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  std::vector<BasicParameter<T>> params_;
  AdamOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::int64_t step_ = 0;
};

using Adam = BasicAdam<float>;

extern template class BasicAdam<float>;
extern template class BasicAdam<double>;

}  // namespace direcnet
