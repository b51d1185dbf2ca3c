#include "thimac/model.hpp"

#include <algorithm>

namespace thimac {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::duplicate_name: return "DuplicateName";
    case Errc::unknown_parent: return "UnknownParent";
    case Errc::unknown_path: return "UnknownPath";
    case Errc::path_is_machine: return "PathIsMachine";
    case Errc::schema: return "SchemaError";
    case Errc::malformed: return "MalformedDocument";
    case Errc::invalid_model: return "InvalidModel";
    case Errc::bad_injection_point: return "BadInjectionPoint";
    case Errc::unknown_thing: return "UnknownThing";
    case Errc::runtime: return "RuntimeError";
    case Errc::unresolved_option: return "UnresolvedOption";
    case Errc::corpus: return "CorpusIntegrity";
  }
  return "?";
}

std::string format_value(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  const auto& s = std::get<std::string>(v);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_record(const Record& r) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : r) {
    if (!first) out += ", ";
    first = false;
    out += k + " = " + format_value(v);
  }
  return out + "}";
}

std::string_view type_name(const Value& v) {
  switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    default: return "string";
  }
}

// ---------------------------------------------------------------------------

Path Path::parent() const {
  Path p = *this;
  if (!p.segments.empty()) p.segments.pop_back();
  return p;
}

Path Path::child(std::string name) const {
  Path p = *this;
  p.segments.push_back(std::move(name));
  return p;
}

Path Path::concat(const Path& rel) const {
  Path p = *this;
  p.segments.insert(p.segments.end(), rel.segments.begin(), rel.segments.end());
  return p;
}

bool Path::starts_with(const Path& prefix) const {
  return prefix.size() <= size() &&
         std::equal(prefix.segments.begin(), prefix.segments.end(), segments.begin());
}

std::string Path::str() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '.';
    out += segments[i];
  }
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(), [&](char c) { return alpha(c) || digit(c); });
}

std::optional<Path> Path::parse(std::string_view text) {
  Path p;
  std::size_t start = 0;
  while (true) {
    auto dot = text.find('.', start);
    auto seg = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (!is_identifier(seg)) return std::nullopt;
    p.segments.emplace_back(seg);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return p;
}

// ---------------------------------------------------------------------------

std::string_view to_string(StageKind k) {
  switch (k) {
    case StageKind::create: return "create";
    case StageKind::process: return "process";
    case StageKind::release: return "release";
    case StageKind::transfer: return "transfer";
    case StageKind::receive: return "receive";
  }
  return "?";
}

std::optional<StageKind> parse_stage_kind(std::string_view s) {
  for (auto k : kStageKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

bool AdjacencyTable::permits(StageKind from, StageKind to) const {
  return std::find(allowed.begin(), allowed.end(), std::pair{from, to}) != allowed.end();
}

const AdjacencyTable& default_adjacency() {
  using K = StageKind;
  static const AdjacencyTable table{{
      {K::transfer, K::receive},
      {K::receive, K::process},
      {K::receive, K::release},
      {K::process, K::release},
      {K::process, K::create},
      {K::create, K::process},
      {K::create, K::release},
      {K::release, K::transfer},
  }};
  return table;
}

std::string_view to_string(StoreKind k) {
  switch (k) {
    case StoreKind::counter: return "counter";
    case StoreKind::table: return "table";
    case StoreKind::rules: return "rules";
  }
  return "?";
}

// ---------------------------------------------------------------------------

Expr Expr::literal(Value v) {
  Expr e;
  e.op = ExprOp::literal;
  e.value = std::move(v);
  return e;
}

Expr Expr::attr(std::string name) {
  Expr e;
  e.op = ExprOp::attr;
  e.name = std::move(name);
  return e;
}

Expr Expr::has(std::string name) {
  Expr e;
  e.op = ExprOp::has;
  e.name = std::move(name);
  return e;
}

Expr Expr::store_ref(Path p) {
  Expr e;
  e.op = ExprOp::store;
  e.store = std::move(p);
  return e;
}

Expr Expr::binary(ExprOp op, Expr lhs, Expr rhs) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

Expr Expr::negate(Expr inner) {
  Expr e;
  e.op = ExprOp::not_;
  e.args.push_back(std::move(inner));
  return e;
}

Expr Expr::member(Expr rec, Path store) {
  Expr e;
  e.op = ExprOp::in;
  e.store = std::move(store);
  e.args.push_back(std::move(rec));
  return e;
}

Expr Expr::make_record(std::vector<std::pair<std::string, Expr>> fields) {
  Expr e;
  e.op = ExprOp::record;
  for (auto& [k, v] : fields) {
    e.fields.push_back(std::move(k));
    e.args.push_back(std::move(v));
  }
  return e;
}

bool Expr::is_true_literal() const {
  const auto* b = std::get_if<bool>(&value);
  return op == ExprOp::literal && b && *b;
}

std::string_view op_symbol(ExprOp op) {
  switch (op) {
    case ExprOp::eq: return "==";
    case ExprOp::ne: return "!=";
    case ExprOp::lt: return "<";
    case ExprOp::le: return "<=";
    case ExprOp::gt: return ">";
    case ExprOp::ge: return ">=";
    case ExprOp::in: return "in";
    case ExprOp::and_: return "and";
    case ExprOp::or_: return "or";
    case ExprOp::not_: return "not";
    case ExprOp::has: return "has";
    default: return "";
  }
}

Action Action::incr(Path store) {
  Action a;
  a.op = ActionOp::incr;
  a.store = std::move(store);
  return a;
}

Action Action::insert(Path store, Expr record) {
  Action a;
  a.op = ActionOp::insert;
  a.store = std::move(store);
  a.expr = std::move(record);
  return a;
}

Action Action::set(std::string attr, Expr value) {
  Action a;
  a.op = ActionOp::set;
  a.attr = std::move(attr);
  a.expr = std::move(value);
  return a;
}

Action Action::drop() {
  Action a;
  a.op = ActionOp::drop;
  return a;
}

Action Action::log(Expr message) {
  Action a;
  a.op = ActionOp::log;
  a.expr = std::move(message);
  return a;
}

Action Action::noop() { return Action{}; }

// ---------------------------------------------------------------------------

const Stage* Machine::find_stage(std::string_view n) const {
  for (const auto& s : stages)
    if (s.name == n) return &s;
  return nullptr;
}

const Machine* Machine::find_machine(std::string_view n) const {
  for (const auto& m : machines)
    if (m.name == n) return &m;
  return nullptr;
}

const StateDecl* Machine::find_state(std::string_view n) const {
  for (const auto& s : states)
    if (s.name == n) return &s;
  return nullptr;
}

const Machine* find_machine(const Model& model, const MachinePath& path) {
  if (path.empty()) return nullptr;
  const Machine* cur = nullptr;
  for (const auto& m : model.machines)
    if (m.name == path.segments[0]) {
      cur = &m;
      break;
    }
  for (std::size_t i = 1; cur && i < path.size(); ++i) cur = cur->find_machine(path.segments[i]);
  return cur;
}

Machine* find_machine(Model& model, const MachinePath& path) {
  return const_cast<Machine*>(find_machine(std::as_const(model), path));
}

MachinePath add_machine(Model& model, const std::optional<MachinePath>& parent, Machine decl) {
  std::vector<Machine>* siblings = &model.machines;
  MachinePath base;
  if (parent) {
    Machine* p = find_machine(model, *parent);
    if (!p) throw Error(Errc::unknown_parent, "unknown parent machine '" + parent->str() + "'");
    siblings = &p->machines;
    base = *parent;
  }
  for (const auto& m : *siblings)
    if (m.name == decl.name)
      throw Error(Errc::duplicate_name,
                  "machine '" + base.child(decl.name).str() + "' already exists");
  if (parent) {
    const Machine* p = find_machine(model, *parent);
    if (p->find_stage(decl.name))
      throw Error(Errc::duplicate_name, "name '" + decl.name + "' already names a stage");
  }
  auto path = base.child(decl.name);
  siblings->push_back(std::move(decl));
  return path;
}

StageRef resolve(const Model& model, const StagePath& path) {
  if (path.empty()) throw Error(Errc::unknown_path, "empty path");
  const Machine* owner = find_machine(model, path.parent());
  if (path.size() >= 2 && owner) {
    if (const Stage* s = owner->find_stage(path.back())) return StageRef{path, owner, s};
  }
  if (find_machine(model, path))
    throw Error(Errc::path_is_machine, "'" + path.str() + "' names a machine, not a stage");
  throw Error(Errc::unknown_path, "no stage at '" + path.str() + "'");
}

ArcId add_flow(Model& model, const StagePath& src, const StagePath& dst) {
  for (const auto* p : {&src, &dst}) {
    try {
      resolve(model, *p);
    } catch (const Error& e) {
      throw Error(Errc::unknown_path, e.what());
    }
  }
  model.flows.push_back(FlowArc{src, dst});
  return model.flows.size() - 1;
}

namespace {

void collect_stages(const Machine& m, const Path& path, std::vector<StageRef>& out) {
  for (const auto& s : m.stages) out.push_back(StageRef{path.child(s.name), &m, &s});
  for (const auto& sub : m.machines) collect_stages(sub, path.child(sub.name), out);
}

}  // namespace

std::vector<StageRef> all_stages(const Model& model) {
  std::vector<StageRef> out;
  for (const auto& m : model.machines) collect_stages(m, Path{m.name}, out);
  return out;
}

}  // namespace thimac
