#include "thimac/sim.hpp"

#include <algorithm>
#include <sstream>

#include "thimac/dsl.hpp"
#include "thimac/json_io.hpp"
#include "thimac/validate.hpp"

namespace thimac {

using nlohmann::json;

std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::arrive: return "arrive";
    case Verb::create: return "create";
    case Verb::process: return "process";
    case Verb::release: return "release";
    case Verb::transfer: return "transfer";
    case Verb::drop: return "drop";
    case Verb::log: return "log";
    case Verb::trigger_fire: return "trigger-fire";
  }
  return "?";
}

std::string_view to_string(EffectKind k) {
  switch (k) {
    case EffectKind::inject: return "inject";
    case EffectKind::derive: return "derive";
    case EffectKind::incr: return "incr";
    case EffectKind::insert: return "insert";
    case EffectKind::set: return "set";
    case EffectKind::log: return "log";
    case EffectKind::branch: return "branch";
    case EffectKind::trigger_fire: return "trigger-fire";
    case EffectKind::drop: return "drop";
  }
  return "?";
}

namespace {

Verb verb_for(StageKind k) {
  switch (k) {
    case StageKind::receive: return Verb::arrive;
    case StageKind::create: return Verb::create;
    case StageKind::process: return Verb::process;
    case StageKind::release: return Verb::release;
    case StageKind::transfer: return Verb::transfer;
  }
  return Verb::arrive;
}

std::string display(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return format_value(v);
}

// A probe matches a row when every probe field is present in the row with an
// equal value. Rule rows may use "*" as a wildcard.
bool row_matches(const Record& probe, const Record& row, bool wildcard) {
  for (const auto& [k, v] : probe) {
    auto it = row.find(k);
    if (it == row.end()) return false;
    if (it->second == v) continue;
    const auto* s = std::get_if<std::string>(&it->second);
    if (wildcard && s && *s == "*") continue;
    return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

Simulator::Simulator(std::shared_ptr<const Model> model, SimConfig config)
    : model_(std::move(model)), index_(*model_), config_(config) {
  auto diags = validate(*model_);
  if (has_errors(diags)) {
    std::string msg = "model '" + model_->name + "' has validation errors:";
    for (const auto& d : diags)
      if (d.severity == Severity::error) msg += "\n  " + format(d);
    throw Error(Errc::invalid_model, msg);
  }
  for (const auto& s : index_.stores()) {
    StoreValue v;
    v.kind = s.decl->kind;
    v.counter = s.decl->initial;
    v.rows = s.decl->rows;
    stores_.emplace(s.path, std::move(v));
    store_paths_.push_back(s.path);
  }
}

void Simulator::fail(const std::string& msg, std::size_t stage, ThingId thing) const {
  const Path& p = index_.stages()[stage].path;
  throw SimRuntimeError(p.str() + ": thing " + std::to_string(thing) + ": " + msg, p, thing);
}

const StoreValue& Simulator::store(const Path& ref, const Ctx& c) const {
  auto hit = index_.resolve_store(c.scope, ref);
  if (!hit) fail("no store named '" + ref.str() + "'", c.stage, c.thing.id);
  return stores_.at(store_paths_[*hit]);
}

StoreValue& Simulator::store(const Path& ref, const Ctx& c) {
  return const_cast<StoreValue&>(std::as_const(*this).store(ref, c));
}

Value Simulator::eval(const Expr& e, const Ctx& c) const {
  auto as_bool = [&](const Expr& x) {
    Value v = eval(x, c);
    const auto* b = std::get_if<bool>(&v);
    if (!b) fail("expected boolean, got " + std::string(type_name(v)) + " in '" + format_expr(x) + "'", c.stage, c.thing.id);
    return *b;
  };
  switch (e.op) {
    case ExprOp::literal: return e.value;
    case ExprOp::attr: {
      auto it = c.thing.attrs.find(e.name);
      if (it == c.thing.attrs.end()) fail("missing attribute '" + e.name + "'", c.stage, c.thing.id);
      return it->second;
    }
    case ExprOp::has: return c.thing.attrs.count(e.name) > 0;
    case ExprOp::store: {
      const StoreValue& s = store(e.store, c);
      if (s.kind != StoreKind::counter)
        fail("store type mismatch: '" + e.store.str() + "' is a " + std::string(to_string(s.kind)) + ", not a counter",
             c.stage, c.thing.id);
      return s.counter;
    }
    case ExprOp::record: fail("a record is not a value", c.stage, c.thing.id);
    case ExprOp::eq: return eval(e.args[0], c) == eval(e.args[1], c);
    case ExprOp::ne: return eval(e.args[0], c) != eval(e.args[1], c);
    case ExprOp::lt:
    case ExprOp::le:
    case ExprOp::gt:
    case ExprOp::ge: {
      Value l = eval(e.args[0], c), r = eval(e.args[1], c);
      const auto* a = std::get_if<std::int64_t>(&l);
      const auto* b = std::get_if<std::int64_t>(&r);
      if (!a || !b)
        fail("ordered comparison needs integers, got " + std::string(type_name(l)) + " and " +
                 std::string(type_name(r)),
             c.stage, c.thing.id);
      switch (e.op) {
        case ExprOp::lt: return *a < *b;
        case ExprOp::le: return *a <= *b;
        case ExprOp::gt: return *a > *b;
        default: return *a >= *b;
      }
    }
    case ExprOp::in: {
      Record probe = eval_record(e.args[0], c);
      const StoreValue& s = store(e.store, c);
      if (s.kind == StoreKind::counter)
        fail("store type mismatch: '" + e.store.str() + "' is a counter, not a table", c.stage, c.thing.id);
      const bool wildcard = s.kind == StoreKind::rules;
      return std::any_of(s.rows.begin(), s.rows.end(),
                         [&](const Record& row) { return row_matches(probe, row, wildcard); });
    }
    case ExprOp::and_: return as_bool(e.args[0]) && as_bool(e.args[1]);
    case ExprOp::or_: return as_bool(e.args[0]) || as_bool(e.args[1]);
    case ExprOp::not_: return !as_bool(e.args[0]);
  }
  fail("unknown expression", c.stage, c.thing.id);
}

bool Simulator::eval_guard(const Expr& e, const Ctx& c) const {
  Value v = eval(e, c);
  const auto* b = std::get_if<bool>(&v);
  if (!b) fail("guard evaluated to " + std::string(type_name(v)), c.stage, c.thing.id);
  return *b;
}

Record Simulator::eval_record(const Expr& e, const Ctx& c) const {
  if (e.op != ExprOp::record) fail("expected a record", c.stage, c.thing.id);
  Record r;
  for (std::size_t i = 0; i < e.fields.size(); ++i) r[e.fields[i]] = eval(e.args[i], c);
  return r;
}

void Simulator::apply(const Action& a, Thing& t, std::size_t stage, TraceEvent& ev, bool& dropped) {
  const auto& node = index_.stages()[stage];
  const Ctx c{t, stage, node.machine};
  Effect fx;
  switch (a.op) {
    case ActionOp::incr: {
      StoreValue& s = store(a.store, c);
      if (s.kind != StoreKind::counter)
        fail("store type mismatch: incr on " + std::string(to_string(s.kind)) + " '" + a.store.str() + "'", stage, t.id);
      fx.kind = EffectKind::incr;
      fx.store = store_paths_[*index_.resolve_store(node.machine, a.store)].str();
      fx.before = s.counter;
      s.counter += 1;
      fx.after = s.counter;
      break;
    }
    case ActionOp::insert: {
      Record row = eval_record(a.expr, c);
      StoreValue& s = store(a.store, c);
      if (s.kind != StoreKind::table)
        fail("store type mismatch: insert into " + std::string(to_string(s.kind)) + " '" + a.store.str() + "'", stage, t.id);
      fx.kind = EffectKind::insert;
      fx.store = store_paths_[*index_.resolve_store(node.machine, a.store)].str();
      fx.added = std::find(s.rows.begin(), s.rows.end(), row) == s.rows.end();
      if (fx.added) s.rows.push_back(row);
      fx.record = std::move(row);
      break;
    }
    case ActionOp::set: {
      const auto k = node.stage->kind;
      if (k != StageKind::process && k != StageKind::create)
        fail("attributes may only change at process or create stages", stage, t.id);
      Value v = eval(a.expr, c);
      fx.kind = EffectKind::set;
      fx.attr = a.attr;
      if (auto it = t.attrs.find(a.attr); it != t.attrs.end()) fx.before = it->second;
      fx.after = v;
      t.attrs[a.attr] = std::move(v);
      break;
    }
    case ActionOp::log:
      fx.kind = EffectKind::log;
      fx.message = display(eval(a.expr, c));
      break;
    case ActionOp::drop:
      if (dropped) return;
      dropped = true;
      fx.kind = EffectKind::drop;
      break;
    case ActionOp::noop: return;
  }
  ev.effects.push_back(std::move(fx));
}

ThingId Simulator::inject(const StagePath& at, std::string type, Record attrs) {
  StageRef ref = resolve(*model_, at);
  if (ref.stage->kind != StageKind::transfer && ref.stage->kind != StageKind::create)
    throw Error(Errc::bad_injection_point, "cannot inject at '" + at.str() + "': it is a " +
                                               std::string(to_string(ref.stage->kind)) +
                                               " stage, not transfer or create");
  const std::size_t stage = *index_.stage_at(at);
  const ThingId id = next_id_++;
  Effect fx;
  fx.kind = EffectKind::inject;
  fx.type = type;
  fx.record = attrs;
  things_.emplace(id, Thing{id, std::move(type), std::move(attrs), std::nullopt});
  outcomes_[id] = ThingOutcome{ThingOutcome::Status::queued, at};
  ++injected_;
  queue_.push_back(Pending{id, stage, true, {std::move(fx)}});
  return id;
}

StepResult Simulator::step() {
  if (queue_.empty()) return StepResult{StepResult::Status::idle, std::nullopt};
  if (steps_ >= config_.max_steps) return StepResult{StepResult::Status::halted, std::nullopt};

  Pending p = std::move(queue_.front());
  queue_.pop_front();
  const auto& node = index_.stages()[p.stage];
  const Stage& stage = *node.stage;

  TraceEvent ev;
  ev.step = ++steps_;
  ev.stage = node.path;
  ev.verb = verb_for(stage.kind);
  ev.effects = std::move(p.birth);

  ThingId tid = p.thing;
  if (!p.born && stage.kind == StageKind::create) {
    // A thing flowing into a create stage gives birth to a new thing that
    // carries its attributes; the original ends here.
    Thing born = things_.at(tid);
    born.id = next_id_++;
    born.derived_from = tid;
    outcomes_[tid] = ThingOutcome{ThingOutcome::Status::terminal, node.path};
    Effect fx;
    fx.kind = EffectKind::derive;
    fx.from = tid;
    ev.effects.push_back(std::move(fx));
    tid = born.id;
    things_.emplace(tid, std::move(born));
    outcomes_[tid] = ThingOutcome{ThingOutcome::Status::queued, node.path};
    ++created_;
  }
  ev.thing = tid;
  Thing& t = things_.at(tid);

  bool dropped = false;
  for (const auto& a : stage.actions) apply(a, t, p.stage, ev, dropped);

  std::optional<std::size_t> next;
  if (!stage.branches.empty()) {
    const Ctx c{t, p.stage, node.machine};
    std::size_t chosen = stage.branches.size();
    for (std::size_t i = 0; i < stage.branches.size(); ++i)
      if (eval_guard(stage.branches[i].guard, c)) {
        chosen = i;
        break;
      }
    if (chosen == stage.branches.size()) fail("no branch guard holds", p.stage, tid);
    const Branch& b = stage.branches[chosen];
    next = index_.resolve_stage(node.machine, b.target);
    Effect fx;
    fx.kind = EffectKind::branch;
    fx.index = chosen;
    fx.target = next ? index_.stages()[*next].path.str() : b.target.str();
    ev.effects.push_back(std::move(fx));
    for (const auto& a : b.actions) apply(a, t, p.stage, ev, dropped);
  } else {
    const auto& outs = index_.outgoing(p.stage);
    if (outs.size() > 1) fail("several exits and no branches to choose between them", p.stage, tid);
    if (outs.size() == 1) next = index_.flows()[outs[0]].dst;
  }

  for (auto ti : index_.triggers_from(p.stage)) {
    const auto& trig = index_.triggers()[ti];
    const Ctx c{t, p.stage, std::nullopt};
    if (trig.arc->guard && !eval_guard(*trig.arc->guard, c)) continue;
    Thing spawned;
    spawned.id = next_id_++;
    spawned.derived_from = t.id;
    if (trig.arc->emit) {
      spawned.type = trig.arc->emit->type;
      for (const auto& [k, e] : trig.arc->emit->attrs) spawned.attrs[k] = eval(e, c);
    } else {
      spawned.type = t.type;
      spawned.attrs = t.attrs;
    }
    const Path& dst = index_.stages()[*trig.dst].path;
    Effect fire;
    fire.kind = EffectKind::trigger_fire;
    fire.target = dst.str();
    fire.thing = spawned.id;
    fire.type = spawned.type;
    fire.record = spawned.attrs;
    ev.effects.push_back(std::move(fire));
    Effect born;
    born.kind = EffectKind::derive;
    born.from = t.id;
    outcomes_[spawned.id] = ThingOutcome{ThingOutcome::Status::queued, dst};
    queue_.push_back(Pending{spawned.id, *trig.dst, true, {std::move(born)}});
    things_.emplace(spawned.id, std::move(spawned));
    ++created_;
  }

  if (dropped) {
    ev.verb = Verb::drop;
    outcomes_[tid] = ThingOutcome{ThingOutcome::Status::dropped, node.path};
  } else if (next) {
    outcomes_[tid] = ThingOutcome{ThingOutcome::Status::queued, index_.stages()[*next].path};
    queue_.push_back(Pending{tid, *next, false, {}});
  } else {
    outcomes_[tid] = ThingOutcome{ThingOutcome::Status::terminal, node.path};
  }

  trace_.events.push_back(ev);
  return StepResult{StepResult::Status::progress, std::move(ev)};
}

const Trace& Simulator::run() {
  try {
    while (step().status == StepResult::Status::progress) {
    }
  } catch (SimRuntimeError& e) {
    e.attach(trace_);
    throw;
  }
  return trace_;
}

std::int64_t Simulator::counter(const Path& store) const {
  auto it = stores_.find(store);
  if (it == stores_.end() || it->second.kind != StoreKind::counter)
    throw Error(Errc::unknown_path, "no counter at '" + store.str() + "'");
  return it->second.counter;
}

Census Simulator::census() const {
  Census c;
  c.injected = injected_;
  c.created = created_;
  for (const auto& [id, o] : outcomes_) {
    switch (o.status) {
      case ThingOutcome::Status::queued: ++c.queued; break;
      case ThingOutcome::Status::dropped: ++c.dropped; break;
      case ThingOutcome::Status::terminal: ++c.terminal; break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

namespace {

json effect_to_json(const Effect& fx) {
  json j{{"kind", std::string(to_string(fx.kind))}};
  switch (fx.kind) {
    case EffectKind::inject:
      j["type"] = fx.type;
      j["attrs"] = record_to_json(fx.record);
      break;
    case EffectKind::derive: j["from"] = fx.from; break;
    case EffectKind::incr:
      j["store"] = fx.store;
      j["from"] = value_to_json(*fx.before);
      j["to"] = value_to_json(*fx.after);
      break;
    case EffectKind::insert:
      j["store"] = fx.store;
      j["record"] = record_to_json(fx.record);
      j["added"] = fx.added;
      break;
    case EffectKind::set:
      j["attr"] = fx.attr;
      j["from"] = fx.before ? value_to_json(*fx.before) : json(nullptr);
      j["to"] = value_to_json(*fx.after);
      break;
    case EffectKind::log: j["message"] = fx.message; break;
    case EffectKind::branch:
      j["index"] = fx.index;
      j["target"] = fx.target;
      break;
    case EffectKind::trigger_fire:
      j["target"] = fx.target;
      j["thing"] = fx.thing;
      j["type"] = fx.type;
      j["attrs"] = record_to_json(fx.record);
      break;
    case EffectKind::drop: break;
  }
  return j;
}

Effect effect_from_json(const json& j) {
  Effect fx;
  const std::string kind = j.at("kind").get<std::string>();
  bool found = false;
  for (auto k : {EffectKind::inject, EffectKind::derive, EffectKind::incr, EffectKind::insert, EffectKind::set,
                 EffectKind::log, EffectKind::branch, EffectKind::trigger_fire, EffectKind::drop})
    if (to_string(k) == kind) {
      fx.kind = k;
      found = true;
    }
  if (!found) throw Error(Errc::malformed, "unknown effect kind '" + kind + "'");
  switch (fx.kind) {
    case EffectKind::inject:
      fx.type = j.at("type").get<std::string>();
      fx.record = record_from_json(j.at("attrs"));
      break;
    case EffectKind::derive: fx.from = j.at("from").get<ThingId>(); break;
    case EffectKind::incr:
      fx.store = j.at("store").get<std::string>();
      fx.before = value_from_json(j.at("from"));
      fx.after = value_from_json(j.at("to"));
      break;
    case EffectKind::insert:
      fx.store = j.at("store").get<std::string>();
      fx.record = record_from_json(j.at("record"));
      fx.added = j.at("added").get<bool>();
      break;
    case EffectKind::set:
      fx.attr = j.at("attr").get<std::string>();
      if (!j.at("from").is_null()) fx.before = value_from_json(j.at("from"));
      fx.after = value_from_json(j.at("to"));
      break;
    case EffectKind::log: fx.message = j.at("message").get<std::string>(); break;
    case EffectKind::branch:
      fx.index = j.at("index").get<std::size_t>();
      fx.target = j.at("target").get<std::string>();
      break;
    case EffectKind::trigger_fire:
      fx.target = j.at("target").get<std::string>();
      fx.thing = j.at("thing").get<ThingId>();
      fx.type = j.at("type").get<std::string>();
      fx.record = record_from_json(j.at("attrs"));
      break;
    case EffectKind::drop: break;
  }
  return fx;
}

}  // namespace

std::string Trace::to_jsonl() const {
  std::string out;
  for (const auto& ev : events) {
    json effects = json::array();
    for (const auto& fx : ev.effects) effects.push_back(effect_to_json(fx));
    json line{{"schema", std::string(kTraceSchema)},
              {"step", ev.step},
              {"thing", ev.thing},
              {"stage", ev.stage.str()},
              {"verb", std::string(to_string(ev.verb))},
              {"effects", std::move(effects)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

Trace Trace::from_jsonl(std::string_view text) {
  Trace t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      if (j.at("schema").get<std::string>() != kTraceSchema)
        throw Error(Errc::schema, "line " + std::to_string(lineno) + ": unsupported trace schema");
      TraceEvent ev;
      ev.step = j.at("step").get<std::uint64_t>();
      ev.thing = j.at("thing").get<ThingId>();
      auto p = Path::parse(j.at("stage").get<std::string>());
      if (!p) throw Error(Errc::malformed, "line " + std::to_string(lineno) + ": bad stage path");
      ev.stage = *p;
      const std::string verb = j.at("verb").get<std::string>();
      bool found = false;
      for (auto v : {Verb::arrive, Verb::create, Verb::process, Verb::release, Verb::transfer, Verb::drop, Verb::log,
                     Verb::trigger_fire})
        if (to_string(v) == verb) {
          ev.verb = v;
          found = true;
        }
      if (!found) throw Error(Errc::malformed, "line " + std::to_string(lineno) + ": unknown verb '" + verb + "'");
      for (const auto& fx : j.at("effects")) ev.effects.push_back(effect_from_json(fx));
      t.events.push_back(std::move(ev));
    } catch (const json::exception& e) {
      throw Error(Errc::malformed, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return t;
}

std::vector<StagePath> stage_sequence(const Trace& trace, ThingId thing) {
  std::vector<StagePath> out;
  for (const auto& ev : trace.events)
    if (ev.thing == thing) out.push_back(ev.stage);
  if (out.empty()) throw Error(Errc::unknown_thing, "thing " + std::to_string(thing) + " does not appear in the trace");
  return out;
}

std::set<StagePath> reachable_stages(const Model& model, const StagePath& from, bool follow_triggers) {
  resolve(model, from);
  ModelIndex index(model);
  const std::size_t start = *index.stage_at(from);
  std::vector<bool> seen(index.stages().size(), false);
  std::deque<std::size_t> work{start};
  seen[start] = true;
  std::set<StagePath> out;
  while (!work.empty()) {
    auto cur = work.front();
    work.pop_front();
    out.insert(index.stages()[cur].path);
    auto visit = [&](std::optional<std::size_t> next) {
      if (next && !seen[*next]) {
        seen[*next] = true;
        work.push_back(*next);
      }
    };
    for (auto fi : index.outgoing(cur)) visit(index.flows()[fi].dst);
    if (follow_triggers)
      for (auto ti : index.triggers_from(cur)) visit(index.triggers()[ti].dst);
  }
  return out;
}

std::vector<Injection> recorded_injections(const Trace& trace) {
  std::map<ThingId, Injection> found;
  for (const auto& ev : trace.events)
    for (const auto& fx : ev.effects)
      if (fx.kind == EffectKind::inject) found.emplace(ev.thing, Injection{ev.stage, fx.type, fx.record});
  std::vector<Injection> out;
  for (auto& [id, inj] : found) out.push_back(std::move(inj));
  return out;
}

}  // namespace thimac
