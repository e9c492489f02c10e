#include "pfguard/cache.h"

namespace pfguard {

AccessOutcome Cache::access(Addr addr) {
  const Addr line = line_of(addr);
  auto it = lines_.find(line);
  if (it == lines_.end()) {
    lines_.emplace(line, FillOrigin::kDemand);
    return {};
  }
  AccessOutcome out{true, it->second};
  it->second = FillOrigin::kDemand;
  return out;
}

void Cache::prefetch_fill(Addr addr) {
  lines_.try_emplace(line_of(addr), FillOrigin::kPrefetch);
}

void Cache::flush(Addr addr) { lines_.erase(line_of(addr)); }

void Cache::flush_all() { lines_.clear(); }

std::optional<FillOrigin> Cache::origin(Addr addr) const {
  auto it = lines_.find(line_of(addr));
  if (it == lines_.end()) return std::nullopt;
  return it->second;
}

ProbeNoise::ProbeNoise(double flip_probability, std::uint64_t seed)
    : p_(flip_probability), rng_(seed) {
  if (!(p_ >= 0.0 && p_ <= 1.0)) {
    throw std::invalid_argument("noise probability must lie in [0, 1]");
  }
}

bool ProbeNoise::observe(bool hit) {
  if (p_ == 0.0) return hit;
  // 53-bit uniform in [0,1); avoids implementation-defined distributions.
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return u < p_ ? !hit : hit;
}

}  // namespace pfguard
