#include "pfguard/cli.h"

#include <algorithm>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "pfguard/attack.h"
#include "pfguard/config.h"
#include "pfguard/engine.h"
#include "pfguard/hex.h"
#include "pfguard/listing.h"
#include "pfguard/load_relocation.h"
#include "pfguard/report.h"
#include "pfguard/slowdown.h"
#include "pfguard/trace.h"

namespace pfguard {
namespace {

// Input problems that map to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Output {
  std::string format = "text";
  std::string path;

  void emit(const Json& report, std::ostream& out) const {
    write(format == "json" ? report.dump(2) + "\n" : render_text(report), out);
  }

  void write(const std::string& text, std::ostream& out) const {
    if (path.empty()) {
      out << text;
      return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + path + "'");
    f << text;
  }
};

void add_output_flags(CLI::App* cmd, Output& o) {
  cmd->add_option("--format", o.format, "report format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  cmd->add_option("--out", o.path, "write the report to FILE instead of stdout");
}

std::uint64_t parse_seed(const std::string& s) {
  try {
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) return parse_hex(s);
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 10);
    if (used != s.size() || s.front() == '-') throw std::invalid_argument("not a seed: " + s);
    return v;
  } catch (const std::out_of_range&) {
    throw UsageError("--seed: out of range: " + s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--seed: ") + e.what());
  }
}

int cmd_sim(const std::string& trace_path, bool vli, double noise,
            const std::optional<std::string>& seed, const Output& o, std::ostream& out) {
  const std::string text = read_file(trace_path);
  Timeline timeline;
  try {
    timeline = parse_trace(text);
  } catch (const TraceParseError& e) {
    throw UsageError(trace_path + ": " + e.what());
  }
  SimRunOptions options;
  options.trace_path = trace_path;
  options.config.vli_enabled = vli;
  options.config.noise = noise;
  if (seed) options.config.seed = parse_seed(*seed);
  else if (timeline.seed != 0) options.config.seed = timeline.seed;
  SimulationResult result;
  try {
    result = run(timeline, options.config);
  } catch (const SimulationError& e) {
    throw UsageError(trace_path + ": " + e.what());
  }
  o.emit(sim_report(options, timeline, result), out);
  return kExitOk;
}

int cmd_attack(const std::string& defense, std::size_t trials,
               const std::optional<std::string>& config_path,
               const std::optional<std::string>& seed, const Output& o, std::ostream& out,
               std::ostream& err) {
  AttackDemoOptions options;
  options.defense = parse_defense(defense);
  options.trials = trials;
  if (seed) options.seed = parse_seed(*seed);
  if (config_path) {
    const std::string text = read_file(*config_path);
    try {
      options.params = params_from_config(parse_config(text));
    } catch (const ConfigError& e) {
      throw UsageError(*config_path + ": " + e.what());
    }
  }
  Json report;
  try {
    report = attack_demo_report(options);
  } catch (const ScenarioError& e) {
    err << "pfguard: invalid scenario: " << e.what() << '\n';
    return kExitFailure;
  }
  o.emit(report, out);
  return kExitOk;
}

int cmd_vli_demo(std::size_t states, const std::optional<std::string>& seed, const Output& o,
                 std::ostream& out) {
  VliDemoOptions options;
  options.random_states = states;
  if (seed) options.seed = parse_seed(*seed);
  const Json report = vli_demo_report(options);
  o.emit(report, out);
  const bool ok = report["counterexample"]["round1_insufficient"].get<bool>() &&
                  report["counterexample"]["two_rounds_erase"].get<bool>() &&
                  report["erasure_proof"]["holds"].get<bool>();
  return ok ? kExitOk : kExitFailure;
}

struct RewriteFlags {
  std::string in;
  std::string begin = "SENSITIVE_BEGIN";
  std::string end = "SENSITIVE_END";
  bool force_swap = false;
  bool force_noswap = false;
  std::optional<std::string> seed;
  bool verify = false;
};

int cmd_rewrite(const RewriteFlags& f, const Output& o, std::ostream& out, std::ostream& err) {
  const std::string text = read_file(f.in);
  Program program;
  try {
    program = parse_listing(text);
  } catch (const ListingError& e) {
    throw UsageError(f.in + ": " + e.what());
  }
  bool swap = false;
  std::uint64_t draw = 0;
  if (f.force_swap) {
    swap = true;
  } else if (f.force_noswap) {
    swap = false;
  } else {
    std::mt19937_64 rng(f.seed ? parse_seed(*f.seed) : kDefaultSeed);
    draw = rng();
    swap = gadget_decide(draw);
  }

  RewriteResult result;
  try {
    result = rewrite_listing(program, f.begin, f.end, swap);
  } catch (const RegionShapeError& e) {
    throw UsageError(f.in + ": " + e.what());
  } catch (const RelocationError& e) {
    err << "pfguard: relocation failed: " << e.what() << '\n';
    return kExitFailure;
  }

  std::optional<EquivalenceReport> eq;
  if (f.verify) eq = verify_equivalence(program, result.program, result.region);
  const bool ok = !eq || eq->passed();

  if (o.format == "json") {
    Json j;
    j["command"] = "rewrite";
    j["input"] = f.in;
    j["begin"] = f.begin;
    j["end"] = f.end;
    j["swapped"] = result.swapped;
    j["log"] = result.log;
    j["listing"] = format_listing(result.program);
    if (eq) {
      j["verify"] = {{"passed", eq->passed()},
                     {"equivalent", eq->equivalent},
                     {"cases", eq->cases},
                     {"taken_cases", eq->taken_cases},
                     {"fallthrough_cases", eq->fallthrough_cases},
                     {"detail", eq->detail}};
    }
    o.write(j.dump(2) + "\n", out);
  } else {
    o.write(format_listing(result.program), out);
    for (const auto& line : result.log) err << line << '\n';
    if (eq) {
      err << "verify: " << (eq->passed() ? "pass" : "FAIL") << " (" << eq->cases << " cases, "
          << eq->taken_cases << " taken, " << eq->fallthrough_cases << " fall-through)";
      if (!eq->detail.empty()) err << ": " << eq->detail;
      err << '\n';
    }
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_estimate(const SlowdownInputs& in, const Output& o, std::ostream& out) {
  double s = 0.0;
  try {
    s = estimate_slowdown(in);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  o.emit(estimate_report(in, s), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prefetcher side-channel simulator and defenses", "pfguard"};
  app.require_subcommand(1);
  Output o;

  auto* sim = app.add_subcommand("sim", "trace-driven simulation");
  sim->require_subcommand(1);
  auto* sim_run = sim->add_subcommand("run", "run a trace file");
  std::string trace_path;
  bool vli = false;
  double noise = 0.0;
  std::optional<std::string> sim_seed;
  sim_run->add_option("--trace", trace_path, "trace file")->required();
  sim_run->add_flag("--vli", vli, "inject loads on every context switch");
  sim_run->add_option("--noise", noise, "probe noise probability")->check(CLI::Range(0.0, 1.0));
  sim_run->add_option("--seed", sim_seed, "RNG seed (decimal or 0x hex)");
  add_output_flags(sim_run, o);

  auto* attack = app.add_subcommand("attack", "attack scenarios");
  attack->require_subcommand(1);
  auto* demo = attack->add_subcommand("demo", "run the attack scenario and an accuracy experiment");
  std::string defense = "none";
  std::size_t trials = 1000;
  std::optional<std::string> config_path;
  std::optional<std::string> attack_seed;
  demo->add_option("--defense", defense)
      ->check(CLI::IsMember({"none", "vli", "vlr"}))
      ->capture_default_str();
  demo->add_option("--trials", trials)->check(CLI::PositiveNumber)->capture_default_str();
  demo->add_option("--config", config_path, "key=value scenario parameters");
  demo->add_option("--seed", attack_seed, "RNG seed (decimal or 0x hex)");
  add_output_flags(demo, o);

  auto* def = app.add_subcommand("defense", "defense demonstrations");
  def->require_subcommand(1);
  auto* vli_demo = def->add_subcommand("vli-demo", "single-round counterexample and erasure check");
  std::size_t states = 10000;
  std::optional<std::string> vli_seed;
  vli_demo->add_option("--states", states, "random adversarial states")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  vli_demo->add_option("--seed", vli_seed, "RNG seed (decimal or 0x hex)");
  add_output_flags(vli_demo, o);

  auto* rewrite = app.add_subcommand("rewrite", "swap the blocks of a protected branch");
  RewriteFlags rf;
  rewrite->add_option("--in", rf.in, "listing file")->required();
  rewrite->add_option("--begin", rf.begin)->capture_default_str();
  rewrite->add_option("--end", rf.end)->capture_default_str();
  auto* fs = rewrite->add_flag("--force-swap", rf.force_swap);
  auto* fn = rewrite->add_flag("--force-noswap", rf.force_noswap);
  auto* rs = rewrite->add_option("--seed", rf.seed, "seed for the gadget draw");
  fs->excludes(fn)->excludes(rs);
  fn->excludes(rs);
  rewrite->add_flag("--verify", rf.verify, "check equivalence with the interpreter");
  add_output_flags(rewrite, o);

  auto* estimate = app.add_subcommand("estimate", "slowdown estimate");
  SlowdownInputs in;
  estimate->add_option("--x", in.x, "fraction of time spent context switching")->required();
  estimate->add_option("--switch-overhead", in.switch_overhead)->required();
  estimate->add_option("--nonswitch-overhead", in.nonswitch_overhead)->required();
  add_output_flags(estimate, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim_run->parsed()) return cmd_sim(trace_path, vli, noise, sim_seed, o, out);
    if (demo->parsed()) return cmd_attack(defense, trials, config_path, attack_seed, o, out, err);
    if (vli_demo->parsed()) return cmd_vli_demo(states, vli_seed, o, out);
    if (rewrite->parsed()) return cmd_rewrite(rf, o, out, err);
    if (estimate->parsed()) return cmd_estimate(in, o, out);
  } catch (const UsageError& e) {
    err << "pfguard: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace pfguard
