#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace thimac {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class Errc {
  duplicate_name,
  unknown_parent,
  unknown_path,
  path_is_machine,
  schema,
  malformed,
  invalid_model,
  bad_injection_point,
  unknown_thing,
  runtime,
  unresolved_option,
  corpus,
};

std::string_view to_string(Errc code);

/// Base error for every failure raised by the library. `code()` is the stable
/// part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

using Value = std::variant<bool, std::int64_t, std::string>;
using Record = std::map<std::string, Value, std::less<>>;

/// DSL spelling of a value: strings quoted with `\"` and `\\` escapes.
std::string format_value(const Value& v);
std::string format_record(const Record& r);
std::string_view type_name(const Value& v);

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

/// Dotted address of a machine or stage, e.g. `asa.ingress.receive`.
struct Path {
  std::vector<std::string> segments;

  Path() = default;
  Path(std::initializer_list<std::string> s) : segments(s) {}
  explicit Path(std::vector<std::string> s) : segments(std::move(s)) {}

  bool empty() const { return segments.empty(); }
  std::size_t size() const { return segments.size(); }
  const std::string& back() const { return segments.back(); }
  Path parent() const;
  Path child(std::string name) const;
  Path concat(const Path& rel) const;
  bool starts_with(const Path& prefix) const;
  std::string str() const;

  /// Parses `a.b.c`. Returns nullopt on empty input, empty segments or
  /// characters outside the identifier alphabet.
  static std::optional<Path> parse(std::string_view text);

  auto operator<=>(const Path&) const = default;
  bool operator==(const Path&) const = default;
};

using StagePath = Path;
using MachinePath = Path;

bool is_identifier(std::string_view s);

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

enum class StageKind { create, process, release, transfer, receive };

inline constexpr std::array<StageKind, 5> kStageKinds = {
    StageKind::create, StageKind::process, StageKind::release, StageKind::transfer,
    StageKind::receive};

std::string_view to_string(StageKind k);
std::optional<StageKind> parse_stage_kind(std::string_view s);

/// Intra-machine flow legality. The table is data so it can be amended
/// without touching the validator.
struct AdjacencyTable {
  std::vector<std::pair<StageKind, StageKind>> allowed;
  bool permits(StageKind from, StageKind to) const;
};

/// transfer->receive, receive->process, receive->release, process->release,
/// process->create, create->process, create->release, release->transfer.
const AdjacencyTable& default_adjacency();

// ---------------------------------------------------------------------------
// Expressions and actions
// ---------------------------------------------------------------------------

enum class ExprOp {
  literal,  // value
  attr,     // thing.<name>
  has,      // has thing.<name>
  store,    // counter read: <store>
  record,   // { fields[i] = args[i], ... }
  eq,
  ne,
  lt,
  le,
  gt,
  ge,
  in,  // args[0] in <store>
  and_,
  or_,
  not_,
};

struct Expr {
  ExprOp op = ExprOp::literal;
  Value value{};
  std::string name;
  Path store;
  std::vector<std::string> fields;
  std::vector<Expr> args;

  bool operator==(const Expr&) const = default;

  static Expr literal(Value v);
  static Expr attr(std::string name);
  static Expr has(std::string name);
  static Expr store_ref(Path p);
  static Expr binary(ExprOp op, Expr lhs, Expr rhs);
  static Expr negate(Expr e);
  static Expr member(Expr rec, Path store);
  static Expr make_record(std::vector<std::pair<std::string, Expr>> fields);

  bool is_true_literal() const;
};

std::string_view op_symbol(ExprOp op);

enum class ActionOp { incr, insert, set, drop, log, noop };

struct Action {
  ActionOp op = ActionOp::noop;
  Path store;        // incr, insert
  std::string attr;  // set
  Expr expr;         // insert (record), set (value), log (message)

  bool operator==(const Action&) const = default;

  static Action incr(Path store);
  static Action insert(Path store, Expr record);
  static Action set(std::string attr, Expr value);
  static Action drop();
  static Action log(Expr message);
  static Action noop();
};

struct Branch {
  Expr guard;
  Path target;
  std::vector<Action> actions;
  bool operator==(const Branch&) const = default;
};

struct ThingTemplate {
  std::string type;
  std::vector<std::pair<std::string, Expr>> attrs;
  bool operator==(const ThingTemplate&) const = default;
};

// ---------------------------------------------------------------------------
// Model tree
// ---------------------------------------------------------------------------

struct Stage {
  std::string name;
  StageKind kind = StageKind::process;
  std::vector<Action> actions;
  std::vector<Branch> branches;
  bool operator==(const Stage&) const = default;
};

enum class StoreKind { counter, table, rules };
std::string_view to_string(StoreKind k);

struct StateDecl {
  std::string name;
  StoreKind kind = StoreKind::counter;
  std::int64_t initial = 0;  // counter
  std::vector<Record> rows;  // table, rules
  bool operator==(const StateDecl&) const = default;
};

/// Flow arc. Inside a machine, endpoints are written relative to that machine
/// and resolve outward through enclosing machines; at model level they are
/// absolute.
struct FlowArc {
  Path src;
  Path dst;
  bool operator==(const FlowArc&) const = default;
};

struct TriggerArc {
  Path src;
  Path dst;
  std::optional<Expr> guard;
  std::optional<ThingTemplate> emit;
  bool operator==(const TriggerArc&) const = default;
};

struct Machine {
  std::string name;
  std::vector<StateDecl> states;
  std::vector<Stage> stages;
  std::vector<Machine> machines;
  std::vector<FlowArc> flows;

  bool operator==(const Machine&) const = default;

  const Stage* find_stage(std::string_view n) const;
  const Machine* find_machine(std::string_view n) const;
  const StateDecl* find_state(std::string_view n) const;
};

struct Model {
  std::string name;
  std::vector<Machine> machines;
  std::vector<FlowArc> flows;
  std::vector<TriggerArc> triggers;

  bool operator==(const Model&) const = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

using ArcId = std::size_t;

struct StageRef {
  Path path;
  const Machine* machine = nullptr;
  const Stage* stage = nullptr;
};

/// Inserts `decl` under `parent` (or at top level). Throws duplicate_name or
/// unknown_parent.
MachinePath add_machine(Model& model, const std::optional<MachinePath>& parent, Machine decl);

/// Appends a model-level flow between two absolute stage paths. Throws
/// unknown_path if either end does not name a stage.
ArcId add_flow(Model& model, const StagePath& src, const StagePath& dst);

/// Absolute lookup. Throws unknown_path or path_is_machine.
StageRef resolve(const Model& model, const StagePath& path);

const Machine* find_machine(const Model& model, const MachinePath& path);
Machine* find_machine(Model& model, const MachinePath& path);

/// Every stage in declaration order (pre-order over machines).
std::vector<StageRef> all_stages(const Model& model);

}  // namespace thimac
