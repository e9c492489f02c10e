#pragma once

#include <stdexcept>

namespace pfguard {

// x is the share of run time spent in context switches. The overheads are
// relative slowdowns of the switch and non-switch portions.
struct SlowdownInputs {
  double x = 0.0;
  double switch_overhead = 0.0;
  double nonswitch_overhead = 0.0;
};

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Relative slowdown of the whole program:
//   x * switch_overhead + (1 - x) * nonswitch_overhead
// Throws InputError unless 0 < x < 1 and both overheads are >= 0.
double estimate_slowdown(const SlowdownInputs& in);

}  // namespace pfguard
