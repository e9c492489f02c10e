#include "pfguard/attack.h"

#include "pfguard/hex.h"
#include "pfguard/load_relocation.h"

namespace pfguard {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ScenarioError(what);
}

}  // namespace

void validate(const AfterImageParams& p) {
  require(p.train_len >= 3, "train_len must be at least 3");
  require(p.s1 != 0, "s1 must be nonzero");
  require(p.s2 != 0, "s2 must be nonzero");
  require(tag_of(p.ip_if) == tag_of(p.victim_ip_if), "tag_of(ip_if) != tag_of(victim_ip_if)");
  require(tag_of(p.ip_else) == tag_of(p.victim_ip_else),
          "tag_of(ip_else) != tag_of(victim_ip_else)");
  require(tag_of(p.ip_if) != tag_of(p.ip_else), "tag_of(ip_if) == tag_of(ip_else)");
  require(tag_of(p.probe_ip) != tag_of(p.ip_if) && tag_of(p.probe_ip) != tag_of(p.ip_else),
          "tag_of(probe_ip) collides with a trained tag");
  require(p.attacker_pid >= 0 && p.victim_pid >= 0, "pids must be nonnegative");
  require(p.attacker_pid != p.victim_pid, "attacker_pid == victim_pid");

  const int n = p.train_len;
  const Addr last_if = stream_address(p.base_if, p.s1, n);
  const Addr last_else = stream_address(p.base_else, p.s2, n);
  const Addr replay_if = stream_address(p.base_if, p.s1, n + 1);
  const Addr replay_else = stream_address(p.base_else, p.s2, n + 1);
  const Addr probe_if = line_of(stream_address(p.base_if, p.s1, n + 2));
  const Addr probe_else = line_of(stream_address(p.base_else, p.s2, n + 2));

  require(probe_if != probe_else, "probe lines of the two entries coincide");
  require(probe_if != line_of(replay_if) && probe_if != line_of(replay_else),
          "if probe line is touched by a replay load");
  require(probe_else != line_of(replay_if) && probe_else != line_of(replay_else),
          "else probe line is touched by a replay load");

  const Addr v = p.victim_addr;
  require(static_cast<Stride>(v - last_if) != p.s1,
          "victim_addr continues the if-entry stride (victim would not disturb it)");
  require(static_cast<Stride>(v - last_else) != p.s2,
          "victim_addr continues the else-entry stride (victim would not disturb it)");
  require(static_cast<Stride>(replay_if - v) != static_cast<Stride>(v - last_if),
          "if replay re-matches the stride written by the victim");
  require(static_cast<Stride>(replay_else - v) != static_cast<Stride>(v - last_else),
          "else replay re-matches the stride written by the victim");
}

Timeline build_afterimage_scenario(const AfterImageParams& p) {
  validate(p);
  Timeline t;
  t.description = std::string("afterimage secret=") + (p.secret ? "if" : "else") +
                  (p.victim_active ? "" : " victim-inactive");
  auto& ev = t.events;
  const int n = p.train_len;
  for (int k = 1; k <= n; ++k) ev.emplace_back(Load{p.attacker_pid, p.ip_if, stream_address(p.base_if, p.s1, k)});
  for (int k = 1; k <= n; ++k) {
    ev.emplace_back(Load{p.attacker_pid, p.ip_else, stream_address(p.base_else, p.s2, k)});
  }
  ev.emplace_back(ContextSwitch{p.attacker_pid, p.victim_pid});
  if (p.victim_active) {
    ev.emplace_back(Load{p.victim_pid, p.secret ? p.victim_ip_if : p.victim_ip_else, p.victim_addr});
  }
  ev.emplace_back(ContextSwitch{p.victim_pid, p.attacker_pid});
  ev.emplace_back(FlushAll{p.attacker_pid});
  ev.emplace_back(Load{p.attacker_pid, p.ip_if, stream_address(p.base_if, p.s1, n + 1)});
  ev.emplace_back(Load{p.attacker_pid, p.ip_else, stream_address(p.base_else, p.s2, n + 1)});
  ev.emplace_back(Load{p.attacker_pid, p.probe_ip, stream_address(p.base_if, p.s1, n + 2)});
  ev.emplace_back(Load{p.attacker_pid, p.probe_ip, stream_address(p.base_else, p.s2, n + 2)});
  return t;
}

std::string to_string(Inference inference) {
  switch (inference) {
    case Inference::kIfPath: return "IfPath";
    case Inference::kElsePath: return "ElsePath";
    case Inference::kVictimInactive: return "VictimInactive";
    case Inference::kIndistinguishable: return "Indistinguishable";
  }
  return "?";
}

ProbeOutcome read_probes(const SimulationResult& result) {
  const auto& log = result.access_log;
  if (log.size() < 2) throw ScenarioError("run has fewer than two accesses");
  return ProbeOutcome{log[log.size() - 2].hit, log.back().hit};
}

bool inference_correct(Inference inference, bool secret) {
  return (inference == Inference::kIfPath && secret) ||
         (inference == Inference::kElsePath && !secret);
}

std::string to_string(Defense defense) {
  switch (defense) {
    case Defense::kNone: return "none";
    case Defense::kVli: return "vli";
    case Defense::kVlr: return "vlr";
  }
  return "?";
}

Defense parse_defense(std::string_view name) {
  if (name == "none") return Defense::kNone;
  if (name == "vli") return Defense::kVli;
  if (name == "vlr") return Defense::kVlr;
  throw std::invalid_argument("unknown defense '" + std::string(name) + "'");
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

AfterImageParams random_params(std::mt19937_64& rng) {
  for (;;) {
    AfterImageParams p;
    const Addr tag_if = uniform_below(rng, 256);
    Addr tag_else = uniform_below(rng, 255);
    if (tag_else >= tag_if) ++tag_else;
    Addr tag_probe = uniform_below(rng, 256);
    while (tag_probe == tag_if || tag_probe == tag_else) tag_probe = uniform_below(rng, 256);

    p.ip_if = 0x400000 + (uniform_below(rng, 0x1000) << 8) + tag_if;
    p.ip_else = 0x400000 + (uniform_below(rng, 0x1000) << 8) + tag_else;
    p.probe_ip = 0x400000 + (uniform_below(rng, 0x1000) << 8) + tag_probe;
    p.victim_ip_if = 0x555555554000 + (uniform_below(rng, 0x1000) << 8) + tag_if;
    p.victim_ip_else = 0x555555554000 + (uniform_below(rng, 0x1000) << 8) + tag_else;

    auto stride = [&rng] {
      const auto mag = static_cast<Stride>(kLineSize * (1 + uniform_below(rng, 64)));
      return uniform_below(rng, 2) ? mag : -mag;
    };
    p.s1 = stride();
    p.s2 = stride();
    p.train_len = 3 + static_cast<int>(uniform_below(rng, 4));
    p.base_if = 0x10000000 + uniform_below(rng, 0x10000) * kPageSize;
    p.base_else = 0x30000000 + uniform_below(rng, 0x10000) * kPageSize;
    p.victim_addr = 0x7f0000000000 + uniform_below(rng, Addr{1} << 24) * kLineSize;
    p.secret = uniform_below(rng, 2) != 0;
    try {
      validate(p);
      return p;
    } catch (const ScenarioError&) {
      // redraw
    }
  }
}

AccuracyResult accuracy_experiment(std::size_t n_trials, Defense defense, std::uint64_t seed) {
  if (n_trials == 0) throw std::invalid_argument("n_trials must be at least 1");
  std::mt19937_64 rng(seed);
  EngineConfig config;
  config.vli_enabled = defense == Defense::kVli;
  config.seed = seed;

  AccuracyResult out;
  out.trials = n_trials;
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    AfterImageParams p = random_params(rng);
    Timeline timeline = build_afterimage_scenario(p);
    if (defense == Defense::kVlr) {
      timeline = apply_vlr_to_timeline(timeline, VictimBranch{p.victim_ip_if, p.victim_ip_else}, rng);
    }
    const ProbeOutcome probes = read_probes(run(timeline, config));
    const Inference inference = infer_secret(probes.if_hit, probes.else_hit);
    ++out.outcome_histogram[inference];
    if (inference_correct(inference, p.secret)) ++out.correct;
  }
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(n_trials);
  return out;
}

AfterImageParams params_from_config(const ConfigMap& config, AfterImageParams p) {
  for (const auto& [key, value] : config) {
    try {
      if (key == "ip_if") p.ip_if = parse_hex(value);
      else if (key == "ip_else") p.ip_else = parse_hex(value);
      else if (key == "probe_ip") p.probe_ip = parse_hex(value);
      else if (key == "s1") p.s1 = parse_signed(value);
      else if (key == "s2") p.s2 = parse_signed(value);
      else if (key == "train_len") p.train_len = static_cast<int>(parse_signed(value));
      else if (key == "base_if") p.base_if = parse_hex(value);
      else if (key == "base_else") p.base_else = parse_hex(value);
      else if (key == "victim_ip_if") p.victim_ip_if = parse_hex(value);
      else if (key == "victim_ip_else") p.victim_ip_else = parse_hex(value);
      else if (key == "victim_addr") p.victim_addr = parse_hex(value);
      else if (key == "secret") p.secret = parse_bool(value);
      else if (key == "victim_active") p.victim_active = parse_bool(value);
      else if (key == "attacker_pid") p.attacker_pid = parse_signed(value);
      else if (key == "victim_pid") p.victim_pid = parse_signed(value);
      else throw ConfigError(0, "unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(0, key + ": " + e.what());
    }
  }
  return p;
}

}  // namespace pfguard
