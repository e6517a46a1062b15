#include "direcnet/optim.hpp"

#include <cmath>
#include <utility>

#include "direcnet/error.hpp"

namespace direcnet {

template <typename T>
BasicAdam<T>::BasicAdam(std::vector<BasicParameter<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate >= 0.0)) throw ConfigError("adam: learning rate must be >= 0");
  if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0) || !(options_.beta2 >= 0.0 && options_.beta2 < 1.0)) {
    throw ConfigError("adam: betas must be in [0, 1)");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), T(0));
    v_.emplace_back(p.tensor.numel(), T(0));
  }
}

template <typename T>
void BasicAdam<T>::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw StateError("adam: parameter '" + p.name + "' has no gradient");
  }
  double grad_scale = 1.0;
  if (options_.clip_norm) {
    double sq = 0;
    for (const auto& p : params_)
      for (T g : p.tensor.grad()) sq += double(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > *options_.clip_norm) grad_scale = *options_.clip_norm / norm;
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(step_));
  const double c2 = 1.0 - std::pow(b2, double(step_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].tensor.data();
    auto g = std::as_const(params_[i].tensor).grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = double(g[j]) * grad_scale;
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / c1;
      const double vhat = vj / c2;
      w[j] = static_cast<T>(double(w[j]) - lr * mhat / (std::sqrt(vhat) + options_.eps));
    }
  }
}

template <typename T>
void BasicAdam<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class BasicAdam<float>;
template class BasicAdam<double>;

}  // namespace direcnet
