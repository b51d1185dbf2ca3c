#include "thimac/json_io.hpp"

#include "thimac/dsl.hpp"

namespace thimac {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::malformed, "malformed tm-json: " + what); }

const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) malformed(std::string("expected object holding '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end()) malformed(std::string("missing key '") + key + "'");
  return *it;
}

std::string str_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) malformed(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

const json& array_field(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_array()) malformed(std::string("'") + key + "' must be an array");
  return v;
}

std::string name_field(const json& obj, bool allow_reserved) {
  std::string n = str_field(obj, "name");
  if (!is_identifier(n)) malformed("'" + n + "' is not an identifier");
  if (!allow_reserved && is_reserved_word(n)) malformed("'" + n + "' is a reserved word");
  return n;
}

Path path_from(const json& j) {
  if (!j.is_string()) malformed("path must be a string");
  auto p = Path::parse(j.get<std::string>());
  if (!p) malformed("bad path '" + j.get<std::string>() + "'");
  return *p;
}

template <typename Enum, typename Range>
Enum enum_from(const std::string& s, const Range& all, const char* what) {
  for (auto k : all)
    if (to_string(k) == s) return k;
  malformed(std::string("unknown ") + what + " '" + s + "'");
}

// -- expressions ------------------------------------------------------------

struct OpName {
  ExprOp op;
  const char* name;
};

constexpr OpName kOps[] = {
    {ExprOp::literal, "lit"}, {ExprOp::attr, "attr"}, {ExprOp::has, "has"},  {ExprOp::store, "store"},
    {ExprOp::record, "record"}, {ExprOp::eq, "=="},   {ExprOp::ne, "!="},    {ExprOp::lt, "<"},
    {ExprOp::le, "<="},         {ExprOp::gt, ">"},    {ExprOp::ge, ">="},    {ExprOp::in, "in"},
    {ExprOp::and_, "and"},      {ExprOp::or_, "or"},  {ExprOp::not_, "not"},
};

json expr_to_json(const Expr& e) {
  json j;
  for (const auto& o : kOps)
    if (o.op == e.op) j["op"] = o.name;
  switch (e.op) {
    case ExprOp::literal: j["value"] = value_to_json(e.value); break;
    case ExprOp::attr:
    case ExprOp::has: j["name"] = e.name; break;
    case ExprOp::store: j["store"] = e.store.str(); break;
    case ExprOp::record: {
      json fields = json::array();
      for (std::size_t i = 0; i < e.fields.size(); ++i)
        fields.push_back(json::array({e.fields[i], expr_to_json(e.args[i])}));
      j["fields"] = std::move(fields);
      break;
    }
    case ExprOp::in:
      j["store"] = e.store.str();
      j["args"] = json::array({expr_to_json(e.args[0])});
      break;
    default: {
      json args = json::array();
      for (const auto& a : e.args) args.push_back(expr_to_json(a));
      j["args"] = std::move(args);
    }
  }
  return j;
}

Expr expr_from_json(const json& j, int depth = 0) {
  if (depth > 512) malformed("expression nested too deeply");
  const std::string name = str_field(j, "op");
  const OpName* found = nullptr;
  for (const auto& o : kOps)
    if (name == o.name) found = &o;
  if (!found) malformed("unknown expression op '" + name + "'");
  Expr e;
  e.op = found->op;
  auto args = [&](std::size_t n) {
    const json& a = array_field(j, "args");
    if (a.size() != n) malformed("'" + name + "' takes " + std::to_string(n) + " operand(s)");
    for (const auto& x : a) e.args.push_back(expr_from_json(x, depth + 1));
  };
  switch (e.op) {
    case ExprOp::literal: e.value = value_from_json(field(j, "value")); break;
    case ExprOp::attr:
    case ExprOp::has: e.name = str_field(j, "name"); break;
    case ExprOp::store: e.store = path_from(field(j, "store")); break;
    case ExprOp::record:
      for (const auto& f : array_field(j, "fields")) {
        if (!f.is_array() || f.size() != 2 || !f[0].is_string()) malformed("record field must be [name, expr]");
        e.fields.push_back(f[0].get<std::string>());
        e.args.push_back(expr_from_json(f[1], depth + 1));
      }
      break;
    case ExprOp::in:
      e.store = path_from(field(j, "store"));
      args(1);
      break;
    case ExprOp::not_: args(1); break;
    default: args(2);
  }
  return e;
}

// -- actions ------------------------------------------------------------------

constexpr std::pair<ActionOp, const char*> kActions[] = {
    {ActionOp::incr, "incr"}, {ActionOp::insert, "insert"}, {ActionOp::set, "set"},
    {ActionOp::drop, "drop"}, {ActionOp::log, "log"},       {ActionOp::noop, "noop"},
};

json action_to_json(const Action& a) {
  json j;
  for (const auto& [op, n] : kActions)
    if (op == a.op) j["op"] = n;
  switch (a.op) {
    case ActionOp::incr: j["store"] = a.store.str(); break;
    case ActionOp::insert:
      j["store"] = a.store.str();
      j["record"] = expr_to_json(a.expr);
      break;
    case ActionOp::set:
      j["attr"] = a.attr;
      j["value"] = expr_to_json(a.expr);
      break;
    case ActionOp::log: j["message"] = expr_to_json(a.expr); break;
    default: break;
  }
  return j;
}

Action action_from_json(const json& j) {
  const std::string name = str_field(j, "op");
  for (const auto& [op, n] : kActions) {
    if (name != n) continue;
    switch (op) {
      case ActionOp::incr: return Action::incr(path_from(field(j, "store")));
      case ActionOp::insert:
        return Action::insert(path_from(field(j, "store")), expr_from_json(field(j, "record")));
      case ActionOp::set: return Action::set(str_field(j, "attr"), expr_from_json(field(j, "value")));
      case ActionOp::log: return Action::log(expr_from_json(field(j, "message")));
      case ActionOp::drop: return Action::drop();
      case ActionOp::noop: return Action::noop();
    }
  }
  malformed("unknown action op '" + name + "'");
}

json actions_to_json(const std::vector<Action>& actions) {
  json arr = json::array();
  for (const auto& a : actions) arr.push_back(action_to_json(a));
  return arr;
}

std::vector<Action> actions_from_json(const json& arr) {
  std::vector<Action> out;
  for (const auto& a : arr) out.push_back(action_from_json(a));
  return out;
}

// -- structure ------------------------------------------------------------------

json flow_to_json(const FlowArc& f) { return json{{"src", f.src.str()}, {"dst", f.dst.str()}}; }

FlowArc flow_from_json(const json& j) { return FlowArc{path_from(field(j, "src")), path_from(field(j, "dst"))}; }

json rows_to_json(const std::vector<Record>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(record_to_json(r));
  return arr;
}

json machine_to_json(const Machine& m) {
  json states = json::array();
  for (const auto& s : m.states) {
    json js{{"name", s.name}, {"kind", std::string(to_string(s.kind))}};
    if (s.kind == StoreKind::counter)
      js["initial"] = s.initial;
    else
      js["rows"] = rows_to_json(s.rows);
    states.push_back(std::move(js));
  }
  json stages = json::array();
  for (const auto& s : m.stages) {
    json branches = json::array();
    for (const auto& b : s.branches)
      branches.push_back(
          {{"guard", expr_to_json(b.guard)}, {"target", b.target.str()}, {"actions", actions_to_json(b.actions)}});
    stages.push_back({{"name", s.name},
                      {"kind", std::string(to_string(s.kind))},
                      {"actions", actions_to_json(s.actions)},
                      {"branches", std::move(branches)}});
  }
  json subs = json::array();
  for (const auto& sub : m.machines) subs.push_back(machine_to_json(sub));
  json flows = json::array();
  for (const auto& f : m.flows) flows.push_back(flow_to_json(f));
  return {{"name", m.name},
          {"states", std::move(states)},
          {"stages", std::move(stages)},
          {"machines", std::move(subs)},
          {"flows", std::move(flows)}};
}

Machine machine_from_json(const json& j, int depth = 0) {
  if (depth > 512) malformed("machines nested too deeply");
  Machine m;
  m.name = name_field(j, false);
  for (const auto& js : array_field(j, "states")) {
    StateDecl s;
    s.name = name_field(js, false);
    s.kind = enum_from<StoreKind>(str_field(js, "kind"),
                                  std::array{StoreKind::counter, StoreKind::table, StoreKind::rules}, "store kind");
    if (s.kind == StoreKind::counter) {
      const json& init = field(js, "initial");
      if (!init.is_number_integer()) malformed("counter 'initial' must be an integer");
      s.initial = init.get<std::int64_t>();
    } else {
      for (const auto& r : array_field(js, "rows")) s.rows.push_back(record_from_json(r));
    }
    m.states.push_back(std::move(s));
  }
  for (const auto& js : array_field(j, "stages")) {
    Stage s;
    s.name = name_field(js, true);
    s.kind = enum_from<StageKind>(str_field(js, "kind"), kStageKinds, "stage kind");
    s.actions = actions_from_json(array_field(js, "actions"));
    for (const auto& jb : array_field(js, "branches"))
      s.branches.push_back(Branch{expr_from_json(field(jb, "guard")), path_from(field(jb, "target")),
                                  actions_from_json(array_field(jb, "actions"))});
    m.stages.push_back(std::move(s));
  }
  for (const auto& sub : array_field(j, "machines")) m.machines.push_back(machine_from_json(sub, depth + 1));
  for (const auto& f : array_field(j, "flows")) m.flows.push_back(flow_from_json(f));
  return m;
}

}  // namespace

json value_to_json(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

Value value_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  malformed("value must be a string, integer or boolean");
}

json record_to_json(const Record& r) {
  json j = json::object();
  for (const auto& [k, v] : r) j[k] = value_to_json(v);
  return j;
}

Record record_from_json(const json& j) {
  if (!j.is_object()) malformed("record must be an object");
  Record r;
  for (const auto& [k, v] : j.items()) r.emplace(k, value_from_json(v));
  return r;
}

std::string export_json(const Model& model) {
  json machines = json::array();
  for (const auto& m : model.machines) machines.push_back(machine_to_json(m));
  json flows = json::array();
  for (const auto& f : model.flows) flows.push_back(flow_to_json(f));
  json triggers = json::array();
  for (const auto& t : model.triggers) {
    json jt{{"src", t.src.str()}, {"dst", t.dst.str()}};
    jt["guard"] = t.guard ? expr_to_json(*t.guard) : json(nullptr);
    if (t.emit) {
      json attrs = json::array();
      for (const auto& [k, e] : t.emit->attrs) attrs.push_back(json::array({k, expr_to_json(e)}));
      jt["emit"] = {{"type", t.emit->type}, {"attrs", std::move(attrs)}};
    } else {
      jt["emit"] = nullptr;
    }
    triggers.push_back(std::move(jt));
  }
  json doc{{"version", kModelSchema},
           {"name", model.name},
           {"machines", std::move(machines)},
           {"flows", std::move(flows)},
           {"triggers", std::move(triggers)}};
  return doc.dump(2) + "\n";
}

Model import_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(e.what());
  }
  if (!doc.is_object()) malformed("top level must be an object");
  auto v = doc.find("version");
  if (v == doc.end()) throw Error(Errc::schema, "tm-json document has no 'version' field");
  if (!v->is_string() || v->get<std::string>() != kModelSchema)
    throw Error(Errc::schema, "unsupported schema version " + v->dump() + "; expected \"tm-json/1\"");

  Model m;
  try {
    m.name = str_field(doc, "name");
    for (const auto& jm : array_field(doc, "machines")) m.machines.push_back(machine_from_json(jm));
    for (const auto& f : array_field(doc, "flows")) m.flows.push_back(flow_from_json(f));
    for (const auto& jt : array_field(doc, "triggers")) {
      TriggerArc t{path_from(field(jt, "src")), path_from(field(jt, "dst")), std::nullopt, std::nullopt};
      if (auto g = jt.find("guard"); g != jt.end() && !g->is_null()) t.guard = expr_from_json(*g);
      if (auto e = jt.find("emit"); e != jt.end() && !e->is_null()) {
        ThingTemplate tpl;
        tpl.type = str_field(*e, "type");
        for (const auto& a : array_field(*e, "attrs")) {
          if (!a.is_array() || a.size() != 2 || !a[0].is_string()) malformed("template attr must be [name, expr]");
          tpl.attrs.emplace_back(a[0].get<std::string>(), expr_from_json(a[1]));
        }
        t.emit = std::move(tpl);
      }
      m.triggers.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  return m;
}

}  // namespace thimac
