#include "direcnet/tape.hpp"

#include "direcnet/error.hpp"

namespace direcnet {

template <typename T>
bool BasicTape<T>::wants(std::initializer_list<const BasicTensor<T>*> inputs) const {
  if (!recording_) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void BasicTape<T>::record(BasicTensor<T> output, Backward backward) {
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::move(output), std::move(backward)});
}

template <typename T>
void BasicTape<T>::backward(BasicTensor<T> loss, BackwardOptions options) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  // Intermediate gradients are per-pass: only leaves accumulate.
  for (auto& e : entries_) e.output.release_grad();
  loss.grad()[0] = T(1);

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward();
    if (!options.retain_intermediate_grads && it->output.id() != loss.id()) {
      it->output.release_grad();
    }
  }
}

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace direcnet
