#pragma once

// Unbounded data-cache model for the hit/miss probe channel. Lines are 64
// bytes, there is no capacity eviction, and residency changes only through
// accesses, prefetch fills and explicit flushes.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>

#include "pfguard/prefetcher.h"

namespace pfguard {

enum class FillOrigin { kDemand, kPrefetch };

struct AccessOutcome {
  bool hit = false;
  // Origin of the line at the time of a hit; empty on a miss.
  std::optional<FillOrigin> origin;
};

class Cache {
 public:
  AccessOutcome access(Addr addr);
  void prefetch_fill(Addr addr);
  void flush(Addr addr);
  void flush_all();

  bool resident(Addr addr) const { return lines_.count(line_of(addr)) != 0; }
  std::optional<FillOrigin> origin(Addr addr) const;
  std::size_t resident_lines() const { return lines_.size(); }

 private:
  std::map<Addr, FillOrigin> lines_;
};

// Bernoulli misread of a probe result. Probability 0 never flips.
class ProbeNoise {
 public:
  ProbeNoise(double flip_probability, std::uint64_t seed);

  bool observe(bool hit);
  double flip_probability() const { return p_; }

 private:
  double p_;
  std::mt19937_64 rng_;
};

}  // namespace pfguard
