// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>

#include "oracles.hpp"
#include "support/fuzz.hpp"
#include "support/generators.hpp"
#include "support/mutations.hpp"
#include "thimac/corpus.hpp"
#include "thimac/dsl.hpp"
#include "thimac/json_io.hpp"
#include "thimac/render.hpp"
#include "thimac/sim.hpp"
#include "thimac/validate.hpp"

using namespace thimac;
using namespace thimac::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kCorpus = THIMAC_CORPUS_DIR;

Path P(std::string_view s) { return *Path::parse(s); }

const Scenario* find(const std::vector<CorpusEntry>& c, const std::string& name, const Model** model) {
  for (const auto& e : c)
    for (const auto& s : e.scenarios)
      if (s.name == name) {
        *model = &e.model;
        return &s;
      }
  return nullptr;
}

Outcome ac1() {
  const auto t0 = Clock::now();
  auto corpus = load_corpus(kCorpus);
  std::size_t models = 0, scenarios = 0, failed = 0;
  std::string first;
  for (const auto& e : corpus) {
    ++models;
    for (const auto& d : validate(e.model))
      if (d.severity == Severity::error) return {false, e.file.string() + ": " + format(d)};
    for (const auto& s : e.scenarios) {
      ++scenarios;
      if (!run_scenario(s, e.model).passed()) {
        ++failed;
        if (first.empty()) first = s.name;
      }
    }
  }
  // The four ASA narrations must be present and carry the checks they claim.
  const Model* m = nullptr;
  const Scenario* syn = find(corpus, "syn_new_connection_acl_pass", &m);
  if (!syn) return {false, "missing syn_new_connection_acl_pass"};
  ScenarioReport r = run_scenario(*syn, *m);
  std::vector<std::string> seq;
  for (const auto& p : stage_sequence(r.trace, 1)) seq.push_back(p.str());
  if (seq != oracle::kAsaSynSequence) return {false, "SYN path differs from the frozen order"};
  for (const char* name : {"non_syn_drop", "acl_mismatch_drop"}) {
    const Scenario* s = find(corpus, name, &m);
    if (!s) return {false, std::string("missing ") + name};
    ScenarioReport rr = run_scenario(*s, *m);
    std::size_t drops = 0, logs = 0;
    for (const auto& [id, o] : rr.outcomes) drops += o.status == ThingOutcome::Status::dropped;
    for (const auto& ev : rr.trace.events)
      for (const auto& fx : ev.effects) logs += fx.kind == EffectKind::log;
    if (!rr.passed() || drops != 1 || logs != 1 || rr.stores.at(P("asa.log.entries")).rows.size() != 1)
      return {false, std::string(name) + ": expected one drop and one log entry"};
  }
  const Scenario* bypass = find(corpus, "existing_connection_bypass", &m);
  if (!bypass) return {false, "missing existing_connection_bypass"};
  for (const auto& p : stage_sequence(run_scenario(*bypass, *m).trace, 1))
    if (p.starts_with(P("asa.tcp_state")) || p.starts_with(P("asa.acl")))
      return {false, "bypass visits " + p.str()};
  const double ms = ms_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu models, %zu scenarios, %zu failed, %.0f ms", models, scenarios, failed, ms);
  return {failed == 0 && scenarios >= oracle::kMinScenarios && ms < 5000, buf + (first.empty() ? "" : " first: " + first)};
}

Outcome ac2() {
  auto model = std::make_shared<const Model>(load_model_file(kCorpus / "part_a/asa.tm"));
  Simulator sim(model);
  for (int i = 0; i < 3; ++i)
    sim.inject(P("asa.ingress.transfer_in"), "packet",
               {{"src", "198.51.100." + std::to_string(40 + i)}, {"dst", std::string("10.0.0.5")},
                {"tcp_flag", std::string("syn")}, {"proto", std::string("tcp")}, {"payload_len", std::int64_t{256}}});
  const Trace& t = sim.run();
  std::map<std::string, std::int64_t> sums;
  for (const auto& ev : t.events)
    for (const auto& fx : ev.effects)
      if (fx.kind == EffectKind::incr)
        sums[fx.store] += std::get<std::int64_t>(*fx.after) - std::get<std::int64_t>(*fx.before);
  const std::int64_t in = sim.counter(P("asa.ingress.input_count"));
  const std::int64_t conn = sim.counter(P("asa.tcp_state.connection_count"));
  const std::int64_t acl = sim.counter(P("asa.acl.acl_hit_count"));
  const bool ok = in == oracle::kLedgerInput && conn == oracle::kLedgerConnection && acl == oracle::kLedgerAclHit &&
                  sums["asa.ingress.input_count"] == in && sums["asa.tcp_state.connection_count"] == conn &&
                  sums["asa.acl.acl_hit_count"] == acl;
  return {ok, "input_count=" + std::to_string(in) + " connection_count=" + std::to_string(conn) +
                  " acl_hit_count=" + std::to_string(acl)};
}

Outcome ac3() {
  auto corpus = load_corpus(kCorpus);
  std::size_t traces = 0, dots = 0;
  for (const auto& e : corpus) {
    if (render_dot(e.model) != render_dot(e.model)) return {false, "DOT differs for " + e.file.string()};
    ++dots;
    for (const auto& s : e.scenarios) {
      if (run_scenario(s, e.model).trace.to_jsonl() != run_scenario(s, e.model).trace.to_jsonl())
        return {false, "trace differs for " + s.name};
      ++traces;
    }
  }
  return {true, std::to_string(traces) + " traces, " + std::to_string(dots) + " renders identical"};
}

std::string round_trip_problem(const Model& m) {
  ParseResult r = parse(serialize(m));
  if (!r.ok()) return "reparse failed";
  if (!(*r.model == m)) return "parse(serialize) differs";
  if (!(import_json(export_json(m)) == m)) return "json differs";
  return {};
}

Outcome ac4() {
  std::size_t files = 0, generated = 0;
  for (const auto& e : fs::recursive_directory_iterator(kCorpus)) {
    if (e.path().extension() != ".tm") continue;
    ++files;
    if (auto p = round_trip_problem(load_model_file(e.path())); !p.empty()) return {false, e.path().string() + ": " + p};
  }
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    Model m = random_valid_model(seed);
    if (has_errors(validate(m))) return {false, "generated model " + std::to_string(seed) + " invalid"};
    if (auto p = round_trip_problem(m); !p.empty()) return {false, "seed " + std::to_string(seed) + ": " + p};
    ++generated;
  }
  return {files >= 5, std::to_string(files) + " corpus files, " + std::to_string(generated) + " generated models"};
}

Outcome ac5() {
  const Model base = load_model_file(kCorpus / "part_a/asa.tm");
  std::size_t killed = 0;
  std::string detail;
  for (const auto& mu : asa_mutations()) {
    Model m = base;
    mu.apply(m);
    std::set<std::string> codes;
    for (const auto& d : validate(m))
      if (d.severity == Severity::error) codes.insert(d.code);
    if (codes == std::set<std::string>{mu.code})
      ++killed;
    else
      detail += " " + mu.code + "!";
  }
  return {killed == 7 && asa_mutations().size() == 7, "killed " + std::to_string(killed) + "/7" + detail};
}

Outcome ac6() {
  std::size_t agree = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed, ++total) {
    GuardFreeCase c = random_guard_free_model(seed, 30);
    if (all_stages(c.model).size() > 30) return {false, "model over 30 stages"};
    auto model = std::make_shared<const Model>(c.model);
    Simulator sim(model, SimConfig{0, 40 * all_stages(c.model).size() + 40});
    sim.inject(c.inject_at, "thing", {});
    std::set<std::string> seen;
    for (const auto& ev : sim.run().events) seen.insert(ev.stage.str());
    agree += seen == independent_reachable(c.model, c.inject_at);
  }
  return {agree == total && total >= 50, std::to_string(agree) + "/" + std::to_string(total) + " agree"};
}

Outcome ac7() {
  std::size_t runs = 0;
  for (const auto& e : load_corpus(kCorpus))
    for (const auto& s : e.scenarios) {
      ++runs;
      const Census c = run_scenario(s, e.model).census;
      if (!c.balanced()) return {false, s.name + " unbalanced"};
    }
  return {runs > 0, std::to_string(runs) + " runs balanced"};
}

Outcome ac8() {
  std::vector<std::string> seeds;
  for (const auto& e : fs::recursive_directory_iterator(kCorpus))
    if (e.path().extension() == ".tm") {
      std::ifstream in(e.path());
      seeds.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
  FuzzReport r = fuzz_parser(seeds, 100000, 2024);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu inputs, %zu rejected, %zu bad spans, %zu unstable, slowest %.1f ms, total %.0f ms",
                r.inputs, r.rejected, r.bad_spans, r.unstable, r.max_ms, r.total_ms);
  const bool ok = r.inputs >= 100000 && r.bad_spans == 0 && r.unstable == 0 && r.max_ms < 1000;
  return {ok, buf + (r.first_problem.empty() ? std::string() : " first: " + r.first_problem)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"AC1 corpus fidelity", ac1}, {"AC2 counter ledger", ac2}, {"AC3 determinism", ac3},
      {"AC4 round trips", ac4},     {"AC5 mutation matrix", ac5}, {"AC6 oracle equivalence", ac6},
      {"AC7 conservation", ac7},    {"AC8 parser robustness", ac8}};
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
