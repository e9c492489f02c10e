#pragma once

// Prefetcher side-channel attack against a secret-dependent branch.
//
// The attacker trains two prefetcher entries whose tags alias the victim's
// if-path and else-path loads, yields to the victim, then replays the next
// load of each training stream. An entry the victim touched lost its
// confidence and stays silent, so the line one stride further misses; the
// untouched entry prefetches and the attacker's access to that line hits.

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "pfguard/config.h"
#include "pfguard/engine.h"
#include "pfguard/trace.h"

namespace pfguard {

struct AfterImageParams {
  Addr ip_if = 0x40115c;    // attacker load aliasing the victim's if-path load
  Addr ip_else = 0x401171;  // attacker load aliasing the victim's else-path load
  Addr probe_ip = 0x4012a0;  // attacker load used to time the probe lines
  Stride s1 = 0x100;
  Stride s2 = 0x140;
  int train_len = 3;
  Addr base_if = 0x10000000;
  Addr base_else = 0x20000000;
  Addr victim_ip_if = 0x55555555515c;
  Addr victim_ip_else = 0x555555555171;
  Addr victim_addr = 0x7ffff7a09000;
  bool secret = true;  // true: victim takes the if-path
  bool victim_active = true;
  Pid attacker_pid = 1;
  Pid victim_pid = 2;
};

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws ScenarioError naming the first violated constraint.
void validate(const AfterImageParams& params);

// Address of the k-th access of a training stream (k = 1 is the first).
constexpr Addr stream_address(Addr base, Stride stride, int k) {
  return base + static_cast<Addr>(stride) * static_cast<Addr>(k);
}

// train (train_len loads per entry) | CS | victim load | CS | flush |
// replay load per entry | access to the line one stride beyond each replay.
Timeline build_afterimage_scenario(const AfterImageParams& params);

enum class Inference { kIfPath, kElsePath, kVictimInactive, kIndistinguishable };

std::string to_string(Inference inference);

// (miss, hit) -> if-path, (hit, miss) -> else-path, (hit, hit) -> victim
// inactive, (miss, miss) -> indistinguishable.
constexpr Inference infer_secret(bool probe_if_hit, bool probe_else_hit) {
  if (!probe_if_hit && probe_else_hit) return Inference::kIfPath;
  if (probe_if_hit && !probe_else_hit) return Inference::kElsePath;
  if (probe_if_hit && probe_else_hit) return Inference::kVictimInactive;
  return Inference::kIndistinguishable;
}

struct ProbeOutcome {
  bool if_hit = false;
  bool else_hit = false;
};

// Reads the two final probe accesses of a scenario run.
ProbeOutcome read_probes(const SimulationResult& result);

bool inference_correct(Inference inference, bool secret);

enum class Defense { kNone, kVli, kVlr };

std::string to_string(Defense defense);
Defense parse_defense(std::string_view name);

// Random valid parameterization (tags, IPs, strides, bases, victim address).
AfterImageParams random_params(std::mt19937_64& rng);

struct AccuracyResult {
  std::size_t trials = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::map<Inference, std::size_t> outcome_histogram;
};

// Runs n_trials scenarios with random parameters and uniformly random secrets.
AccuracyResult accuracy_experiment(std::size_t n_trials, Defense defense, std::uint64_t seed);

// Applies config keys named after AfterImageParams fields. Throws ConfigError
// for unknown keys or malformed values.
AfterImageParams params_from_config(const ConfigMap& config, AfterImageParams base = {});

// Uniform integer in [0, bound) from raw generator output.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

}  // namespace pfguard
