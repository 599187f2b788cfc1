// SPDX-License-Identifier: Apache-2.0
#include "avmask/core/tape.hpp"

#include "avmask/core/errors.hpp"

namespace avmask {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() noexcept { return g_active_tape; }

void Tape::record(const char* op_name, BackwardFn fn) {
  if (consumed_) throw GraphError("recording onto a consumed tape; call reset() first");
  entries_.push_back({op_name, std::move(fn)});
}

void Tape::check_backward_allowed(bool scalar, bool attached, const std::string& shape) const {
  if (consumed_) throw GraphError("backward() called twice without reset()");
  if (!scalar) throw GraphError("backward() needs a scalar loss, got " + shape);
  if (!attached) throw GraphError("loss is detached from every parameter");
}

void Tape::replay() {
  visit_log_.clear();
  visit_log_.reserve(entries_.size());
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    visit_log_.emplace_back(it->name);
    it->fn();
  }
  entries_.clear();
  consumed_ = true;
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

}  // namespace avmask
