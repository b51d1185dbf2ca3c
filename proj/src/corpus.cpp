#include "thimac/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "thimac/dsl.hpp"
#include "thimac/json_io.hpp"
#include "thimac/validate.hpp"

namespace thimac {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::corpus, "cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void bad(const fs::path& file, const std::string& what) {
  throw Error(Errc::malformed, file.string() + ": " + what);
}

Path path_of(const json& j, const fs::path& file) {
  if (!j.is_string()) bad(file, "path must be a string");
  auto p = Path::parse(j.get<std::string>());
  if (!p) bad(file, "bad path '" + j.get<std::string>() + "'");
  return *p;
}

std::vector<Path> paths_of(const json& j, const fs::path& file) {
  std::vector<Path> out;
  for (const auto& e : j) out.push_back(path_of(e, file));
  return out;
}

Expectation expectation_from(const json& j, const fs::path& file) {
  Expectation e;
  if (j.contains("sequences"))
    for (const auto& s : j.at("sequences")) {
      SequenceCheck c;
      const std::string mode = s.value("mode", "full");
      if (mode == "full") c.mode = SequenceCheck::Mode::full;
      else if (mode == "prefix") c.mode = SequenceCheck::Mode::prefix;
      else if (mode == "subsequence") c.mode = SequenceCheck::Mode::subsequence;
      else if (mode == "excludes") c.mode = SequenceCheck::Mode::excludes;
      else bad(file, "unknown sequence mode '" + mode + "'");
      c.thing = s.value("thing", ThingId{1});
      c.stages = paths_of(s.at("stages"), file);
      e.sequences.push_back(std::move(c));
    }
  if (j.contains("counters"))
    for (const auto& [k, v] : j.at("counters").items()) e.counters[path_of(k, file)] = v.get<std::int64_t>();
  if (j.contains("rows"))
    for (const auto& [k, v] : j.at("rows").items()) e.rows[path_of(k, file)] = v.get<std::size_t>();
  if (j.contains("drops")) e.drops = j.at("drops").get<std::size_t>();
  if (j.contains("log_entries")) e.log_entries = j.at("log_entries").get<std::size_t>();
  if (j.contains("things"))
    for (const auto& t : j.at("things")) {
      ThingCheck c;
      c.id = t.at("id").get<ThingId>();
      if (t.contains("terminal")) c.terminal = path_of(t.at("terminal"), file);
      if (t.contains("dropped_at")) c.dropped_at = path_of(t.at("dropped_at"), file);
      if (t.contains("attrs")) c.attrs = record_from_json(t.at("attrs"));
      e.things.push_back(std::move(c));
    }
  return e;
}

std::string join(const std::vector<StagePath>& v) {
  std::string s;
  for (const auto& p : v) s += (s.empty() ? "" : " ") + p.str();
  return s;
}

bool is_subsequence(const std::vector<StagePath>& want, const std::vector<StagePath>& got) {
  std::size_t i = 0;
  for (const auto& p : got)
    if (i < want.size() && p == want[i]) ++i;
  return i == want.size();
}

}  // namespace

Model load_model_file(const fs::path& file) {
  const std::string text = read_file(file);
  if (file.extension() == ".json") {
    try {
      return import_json(text);
    } catch (const Error& e) {
      throw Error(Errc::corpus, file.string() + ": " + e.what());
    }
  }
  ParseResult r = parse(text);
  if (!r.ok()) {
    std::string msg;
    for (const auto& d : r.diagnostics) msg += (msg.empty() ? "" : "\n") + d.format(file.string());
    throw Error(Errc::corpus, msg);
  }
  return std::move(*r.model);
}

std::vector<Scenario> load_scenarios(const fs::path& file, const fs::path& corpus_root) {
  json doc;
  try {
    doc = json::parse(read_file(file));
  } catch (const json::exception& e) {
    bad(file, e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != kScenarioSchema)
    throw Error(Errc::schema, file.string() + ": expected schema " + std::string(kScenarioSchema));
  std::vector<Scenario> out;
  try {
    const fs::path model = fs::absolute(corpus_root / doc.at("model").get<std::string>()).lexically_normal();
    for (const auto& js : doc.at("scenarios")) {
      Scenario s;
      s.name = js.at("name").get<std::string>();
      s.note = js.value("note", "");
      s.model_file = model;
      s.max_steps = js.value("max_steps", std::uint64_t{10000});
      for (const auto& ji : js.at("injections")) {
        const std::size_t times = ji.value("repeat", std::size_t{1});
        Injection inj{path_of(ji.at("at"), file), ji.value("type", "packet"),
                      ji.contains("attrs") ? record_from_json(ji.at("attrs")) : Record{}};
        for (std::size_t i = 0; i < times; ++i) s.injections.push_back(inj);
      }
      s.expect = expectation_from(js.value("expect", json::object()), file);
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    bad(file, e.what());
  }
  return out;
}

std::vector<CorpusEntry> load_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(Errc::corpus, "no corpus directory at '" + root.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".tm") files.push_back(fs::absolute(e.path()).lexically_normal());
  std::sort(files.begin(), files.end());

  std::vector<CorpusEntry> out;
  for (const auto& f : files) {
    CorpusEntry entry{f, load_model_file(f), {}};
    auto diags = validate(entry.model);
    if (has_errors(diags)) {
      std::string msg = f.string() + " does not validate:";
      for (const auto& d : diags) msg += "\n  " + format(d);
      throw Error(Errc::corpus, msg);
    }
    out.push_back(std::move(entry));
  }

  std::vector<fs::path> scenario_files;
  if (fs::is_directory(root / "scenarios"))
    for (const auto& e : fs::directory_iterator(root / "scenarios"))
      if (e.is_regular_file() && e.path().extension() == ".json") scenario_files.push_back(e.path());
  std::sort(scenario_files.begin(), scenario_files.end());
  for (const auto& sf : scenario_files)
    for (auto& s : load_scenarios(sf, root)) {
      auto it = std::find_if(out.begin(), out.end(), [&](const CorpusEntry& c) { return c.file == s.model_file; });
      if (it == out.end())
        throw Error(Errc::corpus, sf.string() + ": scenario '" + s.name + "' names missing model " + s.model_file.string());
      it->scenarios.push_back(std::move(s));
    }
  return out;
}

bool ScenarioReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

ScenarioReport run_scenario(const Scenario& s, const Model& model) {
  ScenarioReport rep;
  rep.name = s.name;
  auto check = [&](std::string what, bool pass, std::string detail = {}) {
    rep.checks.push_back(CheckResult{std::move(what), pass, std::move(detail)});
  };

  auto shared = std::make_shared<const Model>(model);
  try {
    Simulator sim(shared, SimConfig{0, s.max_steps});
    for (const auto& inj : s.injections) sim.inject(inj.at, inj.type, inj.attrs);
    sim.run();
    rep.trace = sim.trace();
    rep.census = sim.census();
    rep.stores = sim.stores();
    rep.outcomes = sim.outcomes();
    rep.things = sim.things();
    check("run completes", true);
  } catch (const SimRuntimeError& e) {
    rep.trace = e.partial_trace();
    check("run completes", false, e.what());
    return rep;
  } catch (const Error& e) {
    check("run completes", false, e.what());
    return rep;
  }

  check("census balances", rep.census.balanced(),
        "injected " + std::to_string(rep.census.injected) + " + created " + std::to_string(rep.census.created) +
            " vs dropped " + std::to_string(rep.census.dropped) + " + terminal " +
            std::to_string(rep.census.terminal) + " + queued " + std::to_string(rep.census.queued));

  const Expectation& x = s.expect;
  for (const auto& sc : x.sequences) {
    std::vector<StagePath> got;
    for (const auto& ev : rep.trace.events)
      if (ev.thing == sc.thing) got.push_back(ev.stage);
    bool ok = false;
    std::string label;
    switch (sc.mode) {
      case SequenceCheck::Mode::full:
        ok = got == sc.stages;
        label = "sequence";
        break;
      case SequenceCheck::Mode::prefix:
        ok = got.size() >= sc.stages.size() && std::equal(sc.stages.begin(), sc.stages.end(), got.begin());
        label = "sequence prefix";
        break;
      case SequenceCheck::Mode::subsequence:
        ok = is_subsequence(sc.stages, got);
        label = "sequence in order";
        break;
      case SequenceCheck::Mode::excludes:
        ok = std::none_of(sc.stages.begin(), sc.stages.end(),
                          [&](const StagePath& p) { return std::find(got.begin(), got.end(), p) != got.end(); });
        label = "sequence excludes";
        break;
    }
    check(label + " of thing " + std::to_string(sc.thing), ok, "visited: " + join(got));
  }

  for (const auto& [path, want] : x.counters) {
    auto it = rep.stores.find(path);
    const bool found = it != rep.stores.end() && it->second.kind == StoreKind::counter;
    check("counter " + path.str() + " == " + std::to_string(want), found && it->second.counter == want,
          found ? "got " + std::to_string(it->second.counter) : "no such counter");
  }
  for (const auto& [path, want] : x.rows) {
    auto it = rep.stores.find(path);
    const bool found = it != rep.stores.end() && it->second.kind != StoreKind::counter;
    check("rows in " + path.str() + " == " + std::to_string(want), found && it->second.rows.size() == want,
          found ? "got " + std::to_string(it->second.rows.size()) : "no such table");
  }
  if (x.drops) check("drops == " + std::to_string(*x.drops), rep.census.dropped == *x.drops,
                     "got " + std::to_string(rep.census.dropped));
  if (x.log_entries) {
    std::size_t logs = 0;
    for (const auto& ev : rep.trace.events)
      logs += std::count_if(ev.effects.begin(), ev.effects.end(),
                            [](const Effect& fx) { return fx.kind == EffectKind::log; });
    check("log entries == " + std::to_string(*x.log_entries), logs == *x.log_entries, "got " + std::to_string(logs));
  }
  for (const auto& tc : x.things) {
    const std::string who = "thing " + std::to_string(tc.id);
    auto it = rep.outcomes.find(tc.id);
    if (it == rep.outcomes.end()) {
      check(who + " exists", false);
      continue;
    }
    const ThingOutcome& o = it->second;
    if (tc.terminal)
      check(who + " ends at " + tc.terminal->str(),
            o.status == ThingOutcome::Status::terminal && o.stage == *tc.terminal, "ended at " + o.stage.str());
    if (tc.dropped_at)
      check(who + " dropped at " + tc.dropped_at->str(),
            o.status == ThingOutcome::Status::dropped && o.stage == *tc.dropped_at, "ended at " + o.stage.str());
    if (!tc.attrs.empty()) {
      auto t = rep.things.find(tc.id);
      Record seen = t != rep.things.end() ? t->second.attrs : Record{};
      bool ok = t != rep.things.end();
      for (const auto& [k, v] : tc.attrs) {
        auto a = seen.find(k);
        ok = ok && a != seen.end() && a->second == v;
      }
      check(who + " attributes " + format_record(tc.attrs), ok, "has " + format_record(seen));
    }
  }
  return rep;
}

}  // namespace thimac
