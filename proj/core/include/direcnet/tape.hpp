#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "direcnet/tensor.hpp"

namespace direcnet {

struct BackwardOptions {
  // Keep gradient buffers of tape-produced (non-leaf) tensors after the
  // pass. Off by default: each buffer is released as soon as its producer
  // has propagated it, which bounds peak memory during training.
  bool retain_intermediate_grads = false;
};

/// Ordered record of executed differentiable operations.
///
/// Ops append one entry per output. backward() walks the entries in exact
/// reverse order; an entry whose output received no gradient is skipped,
/// so tensors unreachable from the loss never get a grad buffer. Leaf
/// gradients accumulate across calls; clear them with zero_grad on the
/// parameters. A tape is single-writer.
template <typename T>
class BasicTape {
 public:
  using Backward = std::function<void()>;

  // A non-recording tape runs ops without keeping any history (inference).
  explicit BasicTape(bool recording = true) : recording_(recording) {}

  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  bool recording() const { return recording_; }

  // True when an op on these inputs must be recorded.
  bool wants(std::initializer_list<const BasicTensor<T>*> inputs) const;

  void record(BasicTensor<T> output, Backward backward);

  void backward(BasicTensor<T> loss, BackwardOptions options = {});

  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    BasicTensor<T> output;
    Backward backward;
  };
  bool recording_;
  std::vector<Entry> entries_;
};

using Tape = BasicTape<float>;
using Tape64 = BasicTape<double>;

extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace direcnet
