// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "avmask/core/tensor.hpp"

namespace avmask {

// Records differentiable ops in execution order so backward() can replay them
// in reverse. One tape per training step; after backward() the recorded
// closures are released and the tape must be reset() before reuse.
//
// Ops record onto the tape installed by the innermost live TapeScope on the
// current thread. With no scope active nothing is recorded (inference mode).
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const char* op_name, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure newest-first.
  // Throws GraphError for a non-scalar or detached loss, or if called twice
  // without reset().
  template <class T>
  void backward(const BasicTensor<T>& loss);

  void reset();

  std::size_t size() const noexcept { return entries_.size(); }
  bool consumed() const noexcept { return consumed_; }

  // Op names in the order backward() visited them.
  const std::vector<std::string>& visit_log() const noexcept { return visit_log_; }

  static Tape* active() noexcept;

 private:
  friend class TapeScope;

  void check_backward_allowed(bool scalar, bool attached, const std::string& shape) const;
  void replay();

  struct Entry {
    const char* name;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  std::vector<std::string> visit_log_;
  bool consumed_ = false;
};

template <class T>
void Tape::backward(const BasicTensor<T>& loss) {
  check_backward_allowed(loss.defined() && loss.numel() == 1, loss.requires_grad(),
                         loss.defined() ? shape_str(loss.shape()) : "undefined");
  loss.mutable_grad()[0] = T{1};
  replay();
}

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording for its lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace avmask
