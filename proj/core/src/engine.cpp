#include "pfguard/engine.h"

#include <optional>

#include "pfguard/cache.h"

namespace pfguard {

SimulationError::SimulationError(std::size_t event_index, const std::string& what)
    : std::runtime_error("event " + std::to_string(event_index) + ": " + what),
      event_index_(event_index) {}

void validate_timeline(const Timeline& timeline) {
  for (std::size_t i = 0; i < timeline.events.size(); ++i) {
    std::visit(
        [i](const auto& e) {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, ContextSwitch>) {
            if (e.from_pid < 0 || e.to_pid < 0) throw SimulationError(i, "negative pid");
          } else {
            if (e.pid < 0) throw SimulationError(i, "negative pid");
          }
        },
        timeline.events[i]);
  }
}

SimulationResult run(const Timeline& timeline, const EngineConfig& config) {
  validate_timeline(timeline);

  PrefetcherState prefetcher(config.prefetcher_capacity);
  Cache cache;
  ProbeNoise noise(config.noise, config.seed);
  std::optional<InjectionPlan> plan;
  if (config.vli_enabled) {
    plan = make_plan(config.injection_code_base, config.injection_data_page,
                     config.prefetcher_capacity);
  }

  SimulationResult result;
  for (std::size_t i = 0; i < timeline.events.size(); ++i) {
    const Event& event = timeline.events[i];
    if (const auto* load = std::get_if<Load>(&event)) {
      const AccessOutcome outcome = cache.access(load->addr);
      result.access_log.push_back(
          AccessRecord{i, load->pid, load->ip, load->addr, noise.observe(outcome.hit)});
      const PrefetchDecision d = prefetcher.observe_load(load->ip, load->addr);
      if (d.triggered) {
        cache.prefetch_fill(*d.prefetch_address);
        result.prefetch_log.push_back(PrefetchRecord{i, *d.prefetch_address, false});
      }
    } else if (std::holds_alternative<ContextSwitch>(event)) {
      if (plan) {
        // Non-preemptible: nothing from the timeline interleaves here.
        std::size_t injected = 0;
        inject(prefetcher, *plan, [&](const InjectedLoad& l, const PrefetchDecision& d) {
          ++injected;
          cache.access(l.addr);
          if (d.triggered) {
            cache.prefetch_fill(*d.prefetch_address);
            result.prefetch_log.push_back(PrefetchRecord{i, *d.prefetch_address, true});
          }
        });
        result.injection_log.push_back(InjectionRecord{i, injected});
      }
    } else if (const auto* flush = std::get_if<Flush>(&event)) {
      cache.flush(flush->addr);
    } else {
      cache.flush_all();
    }
  }
  result.final_snapshot = prefetcher.snapshot();
  return result;
}

}  // namespace pfguard
