#include "pfguard/slowdown.h"

#include <cmath>

namespace pfguard {

double estimate_slowdown(const SlowdownInputs& in) {
  if (!(in.x > 0.0 && in.x < 1.0)) throw InputError("x must lie in the open interval (0, 1)");
  if (!(in.switch_overhead >= 0.0) || !std::isfinite(in.switch_overhead)) {
    throw InputError("switch overhead must be a finite value >= 0");
  }
  if (!(in.nonswitch_overhead >= 0.0) || !std::isfinite(in.nonswitch_overhead)) {
    throw InputError("non-switch overhead must be a finite value >= 0");
  }
  return in.x * in.switch_overhead + (1.0 - in.x) * in.nonswitch_overhead;
}

}  // namespace pfguard
