// tm: command-line front end for thinging-machine models.
//
// Exit codes: 0 ok, 1 validation errors (or warnings with --strict, or a
// failed scenario / fmt --check drift), 2 parse error, 3 simulation runtime
// error, 4 usage error.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "thimac/corpus.hpp"
#include "thimac/dsl.hpp"
#include "thimac/json_io.hpp"
#include "thimac/model_index.hpp"
#include "thimac/render.hpp"
#include "thimac/sim.hpp"
#include "thimac/validate.hpp"

namespace fs = std::filesystem;
using namespace thimac;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kParse = 2, kRuntime = 3, kUsage = 4 };

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool color_enabled() { return std::getenv("TM_NO_COLOR") == nullptr && isatty(fileno(stderr)); }

std::string paint(const std::string& s, const char* code) {
  if (!color_enabled()) return s;
  return std::string("\033[") + code + "m" + s + "\033[0m";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Usage("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Temp file next to the target, then rename, so a failed run leaves nothing.
void write_atomic(const fs::path& target, const std::string& text) {
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Usage("cannot write '" + target.string() + "'");
    out << text;
    if (!out.flush()) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Usage("cannot write '" + target.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Usage("cannot write '" + target.string() + "'");
  }
}

struct Loaded {
  std::optional<Model> model;
  int exit = kOk;
};

Loaded load(const std::string& file) {
  if (!fs::is_regular_file(file)) {
    std::cerr << "tm: no such file '" << file << "'\n";
    return {std::nullopt, kUsage};
  }
  const std::string text = read_file(file);
  if (fs::path(file).extension() == ".json") {
    try {
      return {import_json(text), kOk};
    } catch (const Error& e) {
      std::cerr << file << ": " << paint("error", "31") << ": " << e.what() << "\n";
      return {std::nullopt, kParse};
    }
  }
  ParseResult r = parse(text);
  if (!r.ok()) {
    for (const auto& d : r.diagnostics) std::cerr << d.format(file) << "\n";
    return {std::nullopt, kParse};
  }
  return {std::move(r.model), kOk};
}

void print_diagnostics(const std::vector<Diagnostic>& diags, bool json) {
  for (const auto& d : diags) {
    if (json) {
      std::cerr << to_json_line(d) << "\n";
      continue;
    }
    const bool err = d.severity == Severity::error;
    std::cerr << paint(std::string(to_string(d.severity)), err ? "31" : "33") << " " << d.code << " "
              << d.path.str() << ": " << d.message << "\n";
  }
}

Path parse_path_option(const std::string& s, const char* what) {
  auto p = Path::parse(s);
  if (!p) throw Usage(std::string(what) + ": bad path '" + s + "'");
  return *p;
}

Value parse_scalar(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  if (!s.empty()) {
    std::size_t pos = 0;
    try {
      long long v = std::stoll(s, &pos);
      if (pos == s.size()) return static_cast<std::int64_t>(v);
    } catch (const std::exception&) {
    }
  }
  return s;
}

// "stage.path attr=v,attr=v"; `type=` sets the thing type.
Injection parse_injection(const std::string& text) {
  std::istringstream in(text);
  std::string at, rest;
  in >> at;
  std::getline(in, rest);
  Injection inj{parse_path_option(at, "--inject"), "packet", {}};
  std::stringstream fields(rest);
  std::string field;
  while (std::getline(fields, field, ',')) {
    auto b = field.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    field = field.substr(b, field.find_last_not_of(' ') - b + 1);
    auto eq = field.find('=');
    if (eq == std::string::npos || eq == 0) throw Usage("--inject: expected attr=value, got '" + field + "'");
    std::string key = field.substr(0, eq);
    std::string val = field.substr(eq + 1);
    if (key == "type")
      inj.type = val;
    else
      inj.attrs[key] = parse_scalar(val);
  }
  return inj;
}

// -- commands -----------------------------------------------------------------

int cmd_validate(const std::string& file, bool strict, bool json) {
  Loaded l = load(file);
  if (!l.model) return l.exit;
  auto diags = validate(*l.model);
  print_diagnostics(diags, json);
  if (has_errors(diags)) return kInvalid;
  if (strict && !diags.empty()) return kInvalid;
  return kOk;
}

int cmd_render(const std::string& file, const std::string& out, const std::vector<std::string>& highlight,
               const std::vector<std::string>& collapse, const std::string& rankdir, bool force) {
  Loaded l = load(file);
  if (!l.model) return l.exit;
  auto diags = validate(*l.model);
  RenderOptions opt;
  if (has_errors(diags)) {
    if (!force) {
      print_diagnostics(diags, false);
      std::cerr << "tm: model has errors; use --force to render anyway\n";
      return kInvalid;
    }
    ModelIndex index(*l.model);
    for (const auto& d : diags)
      if (d.severity == Severity::error && index.stage_at(d.path)) opt.errors.insert(d.path);
  }
  opt.rankdir = rankdir;
  for (const auto& h : highlight) {
    if (fs::is_regular_file(h)) {
      Trace t = Trace::from_jsonl(read_file(h));
      for (const auto& ev : t.events) opt.highlight.insert(ev.stage);
    } else {
      opt.highlight.insert(parse_path_option(h, "--highlight"));
    }
  }
  for (const auto& c : collapse) opt.collapse.insert(parse_path_option(c, "--collapse"));
  const std::string dot = render_dot(*l.model, opt);
  if (out.empty() || out == "-")
    std::cout << dot;
  else
    write_atomic(out, dot);
  return kOk;
}

void print_run(const Simulator& sim, std::ostream& os) {
  os << "steps: " << sim.steps() << "\n";
  const Census c = sim.census();
  os << "injected: " << c.injected << ", created: " << c.created << ", dropped: " << c.dropped
     << ", terminal: " << c.terminal << ", queued: " << c.queued << "\n";
  std::size_t logs = 0;
  for (const auto& ev : sim.trace().events)
    for (const auto& fx : ev.effects) logs += fx.kind == EffectKind::log;
  os << "log entries: " << logs << "\n";
  os << "stores:\n";
  for (const auto& [path, v] : sim.stores()) {
    if (v.kind == StoreKind::counter)
      os << "  " << path.str() << " = " << v.counter << "\n";
    else
      os << "  " << path.str() << " = " << v.rows.size() << " row(s)\n";
  }
  os << "things:\n";
  for (const auto& [id, o] : sim.outcomes()) {
    const char* st = o.status == ThingOutcome::Status::dropped    ? "dropped at"
                     : o.status == ThingOutcome::Status::terminal ? "ended at"
                                                                  : "queued at";
    os << "  " << id << " (" << sim.things().at(id).type << ") " << st << " " << o.stage.str() << "\n";
  }
}

std::optional<Scenario> find_scenario(const std::string& file, const std::string& name, std::string dir) {
  const fs::path model = fs::absolute(file).lexically_normal();
  if (dir.empty()) dir = (model.parent_path().parent_path() / "scenarios").string();
  if (!fs::is_directory(dir)) throw Usage("no scenario directory '" + dir + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  bool other_model = false;
  for (const auto& f : files)
    for (auto& s : load_scenarios(f, fs::path(dir).parent_path())) {
      if (s.name != name) continue;
      std::error_code ec;
      if (fs::equivalent(s.model_file, model, ec)) return s;
      other_model = true;
    }
  if (other_model) throw Usage("scenario '" + name + "' belongs to a different model");
  return std::nullopt;
}

int cmd_sim(const std::string& file, const std::string& scenario, const std::string& scenario_dir,
            const std::vector<std::string>& injects, std::optional<std::uint64_t> max_steps, const std::string& trace_out) {
  if (scenario.empty() == injects.empty()) throw Usage("sim: give exactly one of --scenario or --inject");
  Loaded l = load(file);
  if (!l.model) return l.exit;
  auto shared = std::make_shared<const Model>(std::move(*l.model));

  std::optional<Scenario> sc;
  std::vector<Injection> injections;
  SimConfig cfg;
  if (!scenario.empty()) {
    sc = find_scenario(file, scenario, scenario_dir);
    if (!sc) throw Usage("no scenario named '" + scenario + "'");
    injections = sc->injections;
    cfg.max_steps = sc->max_steps;
  } else {
    for (const auto& i : injects) injections.push_back(parse_injection(i));
  }
  if (max_steps) cfg.max_steps = *max_steps;

  std::optional<Simulator> sim;
  try {
    sim.emplace(shared, cfg);
  } catch (const Error& e) {
    std::cerr << "tm: " << e.what() << "\n";
    return kInvalid;
  }
  for (const auto& inj : injections) {
    try {
      sim->inject(inj.at, inj.type, inj.attrs);
    } catch (const Error& e) {
      throw Usage(std::string("--inject: ") + e.what());
    }
  }
  try {
    sim->run();
  } catch (const SimRuntimeError& e) {
    std::cerr << paint("runtime error", "31") << ": " << e.what() << "\n";
    return kRuntime;
  }
  if (sim->queued() > 0) std::cout << "halted after " << sim->steps() << " step(s)\n";
  print_run(*sim, std::cout);

  int rc = kOk;
  if (sc && !max_steps) {
    ScenarioReport rep = run_scenario(*sc, *shared);
    std::cout << "scenario " << sc->name << ":\n";
    for (const auto& c : rep.checks) {
      std::cout << "  " << (c.pass ? "ok    " : "FAILED") << " " << c.what;
      if (!c.pass && !c.detail.empty()) std::cout << " (" << c.detail << ")";
      std::cout << "\n";
    }
    if (!rep.passed()) rc = kInvalid;
  }
  if (!trace_out.empty()) write_atomic(trace_out, sim->trace().to_jsonl());
  return rc;
}

int cmd_fmt(const std::string& file, bool check) {
  Loaded l = load(file);
  if (!l.model) return l.exit;
  const bool json = fs::path(file).extension() == ".json";
  const std::string canon = json ? export_json(*l.model) : serialize(*l.model);
  const std::string current = read_file(file);
  if (check) {
    if (current != canon) {
      std::cerr << file << ": not in canonical form\n";
      return kInvalid;
    }
    return kOk;
  }
  if (current != canon) write_atomic(file, canon);
  return kOk;
}

int cmd_stats(const std::string& file) {
  Loaded l = load(file);
  if (!l.model) return l.exit;
  const Model& m = *l.model;
  ModelIndex index(m);
  std::map<StageKind, std::size_t> by_kind;
  std::size_t depth = 0;
  for (const auto& s : index.stages()) ++by_kind[s.stage->kind];
  for (std::size_t i = 0; i < index.machines().size(); ++i) depth = std::max(depth, index.depth(i));
  std::cout << "model: " << m.name << "\n";
  std::cout << "machines: " << index.machines().size() << "\n";
  std::cout << "stages: " << index.stages().size() << "\n";
  for (auto k : kStageKinds) std::cout << "  " << to_string(k) << ": " << by_kind[k] << "\n";
  std::cout << "flows: " << index.flows().size() << "\n";
  std::cout << "triggers: " << index.triggers().size() << "\n";
  std::cout << "max depth: " << depth << "\n";
  for (std::size_t i = 0; i < index.machines().size(); ++i) {
    if (index.machines()[i].parent) continue;
    const Path& top = index.machines()[i].path;
    std::size_t machines = 0, stages = 0;
    for (const auto& n : index.machines()) machines += n.path.starts_with(top);
    for (const auto& s : index.stages()) stages += s.path.starts_with(top);
    std::cout << "  " << top.str() << ": " << machines << " machine(s), " << stages << " stage(s)\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tm: validate, render and simulate thinging-machine models"};
  app.require_subcommand(1);

  std::string file;
  bool strict = false, json = false;
  auto* v = app.add_subcommand("validate", "check structural rules");
  v->add_option("file", file, "model (.tm or .json)")->required();
  v->add_flag("--strict", strict, "treat warnings as errors");
  v->add_flag("--json", json, "JSON lines on standard error");

  std::string out, rankdir = "LR";
  std::vector<std::string> highlight, collapse;
  bool force = false;
  auto* r = app.add_subcommand("render", "emit Graphviz DOT");
  r->add_option("file", file, "model (.tm or .json)")->required();
  r->add_option("-o,--output", out, "output file (default standard output)");
  r->add_option("--highlight", highlight, "trace .jsonl file, or stage/machine path");
  r->add_option("--collapse", collapse, "machine path to draw as one node");
  r->add_option("--rankdir", rankdir, "LR or TB");
  r->add_flag("--force", force, "render even when validation fails");

  std::string scenario, scenario_dir, trace_out;
  std::vector<std::string> injects;
  std::optional<std::uint64_t> max_steps;
  auto* s = app.add_subcommand("sim", "run the simulator");
  s->add_option("file", file, "model (.tm or .json)")->required();
  s->add_option("--scenario", scenario, "scenario name");
  s->add_option("--scenario-dir", scenario_dir, "directory of scenario files");
  s->add_option("--inject", injects, "\"stage.path attr=v,...\"");
  s->add_option("--max-steps", max_steps, "step budget");
  s->add_option("--trace", trace_out, "write the trace as JSON lines");

  bool check = false;
  auto* f = app.add_subcommand("fmt", "rewrite in canonical form");
  f->add_option("file", file, "model (.tm or .json)")->required();
  f->add_flag("--check", check, "only report drift");

  auto* st = app.add_subcommand("stats", "count machines, stages and arcs");
  st->add_option("file", file, "model (.tm or .json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*v) return cmd_validate(file, strict, json);
    if (*r) return cmd_render(file, out, highlight, collapse, rankdir, force);
    if (*s) return cmd_sim(file, scenario, scenario_dir, injects, max_steps, trace_out);
    if (*f) return cmd_fmt(file, check);
    if (*st) return cmd_stats(file);
  } catch (const Usage& e) {
    std::cerr << "tm: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "tm: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::runtime: return kRuntime;
      case Errc::invalid_model: return kInvalid;
      default: return kUsage;
    }
  }
  return kUsage;
}
