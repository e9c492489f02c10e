#include "pfguard/report.h"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "pfguard/hex.h"
#include "pfguard/load_relocation.h"

namespace pfguard {
namespace {

std::string tag_hex(IpTag t) { return hex(t.value); }

Json decision_json(const PrefetchDecision& d) {
  Json j;
  j["triggered"] = d.triggered;
  j["prefetch_address"] = d.prefetch_address ? Json(hex(*d.prefetch_address)) : Json(nullptr);
  return j;
}

bool tags_within(const std::vector<PrefetcherEntry>& snapshot, const std::vector<IpTag>& tags) {
  const std::set<IpTag> allowed(tags.begin(), tags.end());
  return std::all_of(snapshot.begin(), snapshot.end(),
                     [&](const PrefetcherEntry& e) { return allowed.count(e.tag) != 0; });
}

Json tag_list(const std::vector<IpTag>& tags) {
  Json j = Json::array();
  for (auto t : tags) j.push_back(tag_hex(t));
  return j;
}

void render(std::ostringstream& os, const Json& j, int indent, const std::string& key) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string prefix = key.empty() ? pad : pad + key + ": ";
  if (j.is_object()) {
    if (!key.empty()) os << pad << key << ":\n";
    for (auto it = j.begin(); it != j.end(); ++it) {
      render(os, it.value(), key.empty() ? indent : indent + 1, it.key());
    }
  } else if (j.is_array()) {
    const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) {
      return e.is_primitive() && !(e.is_string() && e.get<std::string>().find(' ') != std::string::npos);
    });
    if (j.empty()) {
      os << prefix << "[]\n";
    } else if (flat) {
      os << prefix;
      for (std::size_t i = 0; i < j.size(); ++i) {
        os << (i ? " " : "") << (j[i].is_string() ? j[i].get<std::string>() : j[i].dump());
      }
      os << '\n';
    } else {
      os << pad << key << ": (" << j.size() << ")\n";
      for (const auto& e : j) {
        os << pad << "  - " << (e.is_string() ? e.get<std::string>() : e.dump()) << '\n';
      }
    }
  } else {
    os << prefix << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
  }
}

}  // namespace

Json to_json(const PrefetcherEntry& e) {
  Json j;
  j["lru_rank"] = e.lru_rank;
  j["tag"] = tag_hex(e.tag);
  j["last_address"] = hex(e.last_address);
  j["stride"] = e.stride ? Json(signed_hex(*e.stride)) : Json(nullptr);
  j["confidence"] = e.confidence;
  return j;
}

Json to_json(const std::vector<PrefetcherEntry>& snapshot) {
  Json j = Json::array();
  for (const auto& e : snapshot) j.push_back(to_json(e));
  return j;
}

Json to_json(const SimulationResult& r) {
  Json j;
  Json access = Json::array();
  for (const auto& a : r.access_log) {
    access.push_back({{"event", a.event_index},
                      {"pid", a.pid},
                      {"ip", hex(a.ip)},
                      {"addr", hex(a.addr)},
                      {"hit", a.hit}});
  }
  Json prefetch = Json::array();
  for (const auto& p : r.prefetch_log) {
    prefetch.push_back({{"event", p.event_index},
                        {"address", hex(p.prefetch_address)},
                        {"during_injection", p.during_injection}});
  }
  Json injection = Json::array();
  for (const auto& i : r.injection_log) {
    injection.push_back({{"event", i.event_index}, {"loads_injected", i.loads_injected}});
  }
  j["access_log"] = std::move(access);
  j["prefetch_log"] = std::move(prefetch);
  j["injection_log"] = std::move(injection);
  j["final_prefetcher"] = to_json(r.final_snapshot);
  return j;
}

Json to_json(const AfterImageParams& p) {
  Json j;
  j["ip_if"] = hex(p.ip_if);
  j["ip_else"] = hex(p.ip_else);
  j["probe_ip"] = hex(p.probe_ip);
  j["s1"] = signed_hex(p.s1);
  j["s2"] = signed_hex(p.s2);
  j["train_len"] = p.train_len;
  j["base_if"] = hex(p.base_if);
  j["base_else"] = hex(p.base_else);
  j["victim_ip_if"] = hex(p.victim_ip_if);
  j["victim_ip_else"] = hex(p.victim_ip_else);
  j["victim_addr"] = hex(p.victim_addr);
  j["secret"] = p.secret;
  j["victim_active"] = p.victim_active;
  j["attacker_pid"] = p.attacker_pid;
  j["victim_pid"] = p.victim_pid;
  return j;
}

Json to_json(const AccuracyResult& r) {
  Json hist;
  for (auto inf : {Inference::kIfPath, Inference::kElsePath, Inference::kVictimInactive,
                   Inference::kIndistinguishable}) {
    auto it = r.outcome_histogram.find(inf);
    hist[to_string(inf)] = it == r.outcome_histogram.end() ? 0 : it->second;
  }
  return Json{{"trials", r.trials},
              {"correct", r.correct},
              {"accuracy", r.accuracy},
              {"outcome_histogram", std::move(hist)}};
}

Json sim_report(const SimRunOptions& options, const Timeline& timeline,
                const SimulationResult& result) {
  Json j;
  j["command"] = "sim run";
  j["config"] = {{"trace", options.trace_path},
                 {"vli", options.config.vli_enabled},
                 {"noise", options.config.noise},
                 {"seed", options.config.seed},
                 {"prefetcher_capacity", options.config.prefetcher_capacity}};
  std::size_t loads = 0;
  std::size_t switches = 0;
  for (const auto& e : timeline.events) {
    loads += std::holds_alternative<Load>(e);
    switches += std::holds_alternative<ContextSwitch>(e);
  }
  std::size_t hits = 0;
  for (const auto& a : result.access_log) hits += a.hit;
  Json summary;
  summary["events"] = timeline.events.size();
  summary["loads"] = loads;
  summary["hits"] = hits;
  summary["misses"] = loads - hits;
  summary["prefetches"] = result.prefetch_log.size();
  summary["context_switches"] = switches;
  summary["injections"] = result.injection_log.size();
  j["summary"] = std::move(summary);
  Json body = to_json(result);
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  return j;
}

Json attack_demo_report(const AttackDemoOptions& o) {
  Json j;
  j["command"] = "attack demo";
  j["defense"] = to_string(o.defense);
  j["seed"] = o.seed;
  j["params"] = to_json(o.params);

  Timeline timeline = build_afterimage_scenario(o.params);
  EngineConfig config;
  config.vli_enabled = o.defense == Defense::kVli;
  config.seed = o.seed;
  std::vector<bool> swaps;
  if (o.defense == Defense::kVlr) {
    std::mt19937_64 rng(o.seed);
    timeline = apply_vlr_to_timeline(
        timeline, VictimBranch{o.params.victim_ip_if, o.params.victim_ip_else}, rng, &swaps);
  }
  const SimulationResult result = run(timeline, config);
  const ProbeOutcome probes = read_probes(result);
  const Inference inference = infer_secret(probes.if_hit, probes.else_hit);

  Json demo;
  Json events = Json::array();
  for (const auto& e : timeline.events) events.push_back(format_event(e));
  demo["timeline"] = std::move(events);
  if (o.defense == Defense::kVlr) {
    Json s = Json::array();
    for (bool b : swaps) s.push_back(b);
    demo["vlr_swaps"] = std::move(s);
  }
  Json body = to_json(result);
  for (auto it = body.begin(); it != body.end(); ++it) demo[it.key()] = it.value();
  const int n = o.params.train_len;
  demo["probes"] = {
      {"if_line", hex(line_of(stream_address(o.params.base_if, o.params.s1, n + 2)))},
      {"if_hit", probes.if_hit},
      {"else_line", hex(line_of(stream_address(o.params.base_else, o.params.s2, n + 2)))},
      {"else_hit", probes.else_hit}};
  demo["inference"] = to_string(inference);
  demo["correct"] = inference_correct(inference, o.params.secret);
  j["demo"] = std::move(demo);
  j["experiment"] = to_json(accuracy_experiment(o.trials, o.defense, o.seed));
  return j;
}

Json vli_demo_report(const VliDemoOptions& o) {
  Json j;
  j["command"] = "defense vli-demo";
  const InjectionPlan plan = make_plan(kDefaultInjectionCodeBase, kDefaultInjectionDataPage);
  j["plan"] = {{"code_base", hex(kDefaultInjectionCodeBase)},
               {"data_page", hex(kDefaultInjectionDataPage)},
               {"round_size", plan.round_size},
               {"loads", plan.loads.size()},
               {"round1_tags", tag_list(plan.round_tags(1))},
               {"round2_tags", tag_list(plan.round_tags(2))},
               {"valid", check_plan(plan).empty()}};

  // One-round insufficiency.
  const SingleRoundWitness w = single_round_counterexample();
  const InjectedLoad& colliding = w.plan.loads[w.colliding_load];
  const auto trained = w.state.snapshot().front();
  PrefetcherState one_round = w.state;
  inject_round(one_round, w.plan, 1);
  Json survivor = nullptr;
  for (const auto& e : one_round.snapshot()) {
    if (e.tag == trained.tag) survivor = to_json(e);
  }
  PrefetcherState probe_one = one_round;
  const PrefetchDecision after_one = probe_one.observe_load(w.probe.ip, w.probe.addr);
  PrefetcherState two_rounds = w.state;
  inject(two_rounds, w.plan);
  PrefetcherState probe_two = two_rounds;
  const PrefetchDecision after_two = probe_two.observe_load(w.probe.ip, w.probe.addr);
  Json cx;
  cx["colliding_load"] = {{"index", w.colliding_load},
                          {"ip", hex(colliding.ip)},
                          {"addr", hex(colliding.addr)}};
  cx["trained_entry"] = to_json(trained);
  cx["after_round1_entry"] = survivor;
  cx["probe"] = {{"ip", hex(w.probe.ip)}, {"addr", hex(w.probe.addr)}};
  cx["probe_after_round1"] = decision_json(after_one);
  cx["probe_after_two_rounds"] = decision_json(after_two);
  cx["round1_insufficient"] = after_one.triggered &&
                              after_one.prefetch_address == w.expected_prefetch;
  cx["two_rounds_erase"] = !after_two.triggered &&
                           two_rounds.snapshot() == expected_post_injection_snapshot(w.plan);
  j["counterexample"] = std::move(cx);

  // Erasure over random and grid states.
  std::mt19937_64 rng(o.seed);
  std::size_t failures = 0;
  std::size_t probes = 0;
  std::size_t triggers = 0;
  std::size_t round1_normalized = 0;
  for (std::size_t i = 0; i < o.random_states; ++i) {
    const PrefetcherState s = random_adversarial_state(rng, plan);
    const ErasureCheck c = check_erasure(s, plan);
    failures += !c.erased();
    probes += c.probes;
    triggers += c.probe_triggers;
    PrefetcherState r1 = s;
    inject_round(r1, plan, 1);
    round1_normalized += tags_within(r1.snapshot(), plan.round_tags(1));
  }
  const auto grid = single_entry_grid(plan);
  std::size_t grid_failures = 0;
  for (const auto& s : grid) {
    const ErasureCheck c = check_erasure(s, plan);
    grid_failures += !c.erased();
    probes += c.probes;
    triggers += c.probe_triggers;
  }
  PrefetcherState empty(plan.round_size);
  inject(empty, plan);
  j["erasure_proof"] = {
      {"seed", o.seed},
      {"random_states", o.random_states},
      {"random_failures", failures},
      {"round1_tags_normalized", round1_normalized},
      {"grid_states", grid.size()},
      {"grid_failures", grid_failures},
      {"post_injection_probes", probes},
      {"post_injection_probe_triggers", triggers},
      {"reference_snapshot", to_json(empty.snapshot())},
      {"holds", failures == 0 && grid_failures == 0 && triggers == 0}};

  // Injected loads per context switch in the end-to-end scenario.
  EngineConfig config;
  config.vli_enabled = true;
  const SimulationResult r = run(build_afterimage_scenario(AfterImageParams{}), config);
  Json per_switch = Json::array();
  for (const auto& rec : r.injection_log) per_switch.push_back(rec.loads_injected);
  j["injected_loads_per_context_switch"] = std::move(per_switch);
  return j;
}

Json estimate_report(const SlowdownInputs& in, double slowdown) {
  return Json{{"command", "estimate"},
              {"x", in.x},
              {"switch_overhead", in.switch_overhead},
              {"nonswitch_overhead", in.nonswitch_overhead},
              {"slowdown", slowdown},
              {"slowdown_percent", slowdown * 100.0}};
}

std::string render_text(const Json& report) {
  std::ostringstream os;
  render(os, report, 0, "");
  return os.str();
}

}  // namespace pfguard
