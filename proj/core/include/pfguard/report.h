#pragma once

// JSON reports emitted by the command-line tool. Field names are stable and
// documented in README.md. Addresses and strides are hex strings so reports
// survive tools that read JSON numbers as doubles.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfguard/attack.h"
#include "pfguard/engine.h"
#include "pfguard/injection.h"
#include "pfguard/slowdown.h"

namespace pfguard {

using Json = nlohmann::ordered_json;

Json to_json(const PrefetcherEntry& entry);
Json to_json(const std::vector<PrefetcherEntry>& snapshot);
Json to_json(const SimulationResult& result);
Json to_json(const AfterImageParams& params);
Json to_json(const AccuracyResult& result);

struct SimRunOptions {
  std::string trace_path;
  EngineConfig config;
};

Json sim_report(const SimRunOptions& options, const Timeline& timeline,
                const SimulationResult& result);

struct AttackDemoOptions {
  Defense defense = Defense::kNone;
  std::size_t trials = 1000;
  std::uint64_t seed = kDefaultSeed;
  AfterImageParams params;
};

Json attack_demo_report(const AttackDemoOptions& options);

struct VliDemoOptions {
  std::size_t random_states = 10000;
  std::uint64_t seed = kDefaultSeed;
};

Json vli_demo_report(const VliDemoOptions& options);

Json estimate_report(const SlowdownInputs& inputs, double slowdown);

// Human-readable rendering of any of the reports above.
std::string render_text(const Json& report);

}  // namespace pfguard
