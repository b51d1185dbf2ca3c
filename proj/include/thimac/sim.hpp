#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "thimac/model.hpp"
#include "thimac/model_index.hpp"

namespace thimac {

using ThingId = std::uint64_t;

/// A flowing entity. `id` and `type` are fixed at birth; only `attrs` change.
struct Thing {
  ThingId id = 0;
  std::string type;
  Record attrs;
  std::optional<ThingId> derived_from;

  bool operator==(const Thing&) const = default;
};

enum class Verb { arrive, create, process, release, transfer, drop, log, trigger_fire };

std::string_view to_string(Verb v);

/// One applied side effect. Which fields are meaningful depends on `kind`:
///   inject        type, attrs                 thing born by injection
///   derive        from                        thing born from another thing
///   incr          store, before, after
///   insert        store, record, added
///   set           attr, before (absent if new), after
///   log           message
///   branch        index, target
///   trigger-fire  target, thing, type, attrs
///   drop
enum class EffectKind { inject, derive, incr, insert, set, log, branch, trigger_fire, drop };

std::string_view to_string(EffectKind k);

struct Effect {
  EffectKind kind = EffectKind::drop;
  std::string store;
  std::string attr;
  std::string target;
  std::string type;
  std::string message;
  std::optional<Value> before;
  std::optional<Value> after;
  Record record;
  ThingId thing = 0;
  ThingId from = 0;
  std::size_t index = 0;
  bool added = false;

  bool operator==(const Effect&) const = default;
};

struct TraceEvent {
  std::uint64_t step = 0;
  ThingId thing = 0;
  Path stage;
  Verb verb = Verb::arrive;
  std::vector<Effect> effects;

  bool operator==(const TraceEvent&) const = default;
};

inline constexpr std::string_view kTraceSchema = "tm-trace/1";

struct Trace {
  std::vector<TraceEvent> events;

  bool operator==(const Trace&) const = default;

  /// JSON lines, one event per line, keys sorted.
  std::string to_jsonl() const;
  static Trace from_jsonl(std::string_view text);
};

struct SimConfig {
  /// Reserved for probabilistic guards; no guard reads it yet.
  std::uint64_t seed = 0;
  std::uint64_t max_steps = 100000;
};

struct StepResult {
  enum class Status { progress, idle, halted };
  Status status = Status::idle;
  std::optional<TraceEvent> event;
};

/// Live value of one declared store.
struct StoreValue {
  StoreKind kind = StoreKind::counter;
  std::int64_t counter = 0;
  std::vector<Record> rows;

  bool operator==(const StoreValue&) const = default;
};

struct ThingOutcome {
  enum class Status { queued, dropped, terminal };
  Status status = Status::queued;
  Path stage;
};

/// created + injected == dropped + terminal + queued after any run.
struct Census {
  std::size_t injected = 0;
  std::size_t created = 0;
  std::size_t dropped = 0;
  std::size_t terminal = 0;
  std::size_t queued = 0;

  bool balanced() const { return injected + created == dropped + terminal + queued; }
};

/// Raised by step()/run() when the model asks for something impossible at
/// run time (missing attribute, type mismatch). run() attaches the trace
/// accumulated before the failure.
class SimRuntimeError : public Error {
 public:
  SimRuntimeError(const std::string& what, Path stage, ThingId thing)
      : Error(Errc::runtime, what), stage_(std::move(stage)), thing_(thing) {}

  const Path& stage() const { return stage_; }
  ThingId thing() const { return thing_; }
  const Trace& partial_trace() const { return partial_; }
  void attach(Trace t) { partial_ = std::move(t); }

 private:
  Path stage_;
  ThingId thing_;
  Trace partial_;
};

/// Deterministic FIFO simulator. Single owner; distinct instances may share
/// one immutable Model across threads.
class Simulator {
 public:
  /// Throws Error(invalid_model) when validate() reports errors.
  Simulator(std::shared_ptr<const Model> model, SimConfig config = {});

  /// Queues a new thing at a transfer or create stage and returns its id.
  ThingId inject(const StagePath& at, std::string type, Record attrs);

  StepResult step();
  const Trace& run();

  const Trace& trace() const { return trace_; }
  std::uint64_t steps() const { return steps_; }
  const SimConfig& config() const { return config_; }
  const Model& model() const { return *model_; }

  /// Store values keyed by absolute store path.
  const std::map<Path, StoreValue>& stores() const { return stores_; }
  std::int64_t counter(const Path& store) const;

  const std::map<ThingId, Thing>& things() const { return things_; }
  const std::map<ThingId, ThingOutcome>& outcomes() const { return outcomes_; }
  Census census() const;
  std::size_t queued() const { return queue_.size(); }

 private:
  struct Pending {
    ThingId thing;
    std::size_t stage;
    bool born;  // entered this stage by birth rather than along a flow
    std::vector<Effect> birth;
  };

  // Evaluation context: the thing at hand, the stage being executed (for
  // error reports) and the machine scope that store names resolve from.
  struct Ctx {
    const Thing& thing;
    std::size_t stage;
    std::optional<std::size_t> scope;
  };

  Value eval(const Expr& e, const Ctx& c) const;
  bool eval_guard(const Expr& e, const Ctx& c) const;
  Record eval_record(const Expr& e, const Ctx& c) const;
  const StoreValue& store(const Path& ref, const Ctx& c) const;
  StoreValue& store(const Path& ref, const Ctx& c);
  void apply(const Action& a, Thing& t, std::size_t stage, TraceEvent& ev, bool& dropped);
  [[noreturn]] void fail(const std::string& msg, std::size_t stage, ThingId thing) const;

  std::shared_ptr<const Model> model_;
  ModelIndex index_;
  SimConfig config_;
  std::map<Path, StoreValue> stores_;
  std::vector<Path> store_paths_;  // by ModelIndex store index
  std::deque<Pending> queue_;
  std::map<ThingId, Thing> things_;
  std::map<ThingId, ThingOutcome> outcomes_;
  ThingId next_id_ = 1;
  std::uint64_t steps_ = 0;
  std::size_t injected_ = 0;
  std::size_t created_ = 0;
  Trace trace_;
};

/// Stages visited by `thing`, in step order. Throws Error(unknown_thing).
std::vector<StagePath> stage_sequence(const Trace& trace, ThingId thing);

/// Closure from `from` over flow arcs (and trigger arcs unless disabled),
/// ignoring guards. Throws Error(unknown_path).
std::set<StagePath> reachable_stages(const Model& model, const StagePath& from, bool follow_triggers = true);

struct Injection {
  StagePath at;
  std::string type;
  Record attrs;
};

/// Injections recorded in a trace, in thing-id order, for replay.
std::vector<Injection> recorded_injections(const Trace& trace);

}  // namespace thimac
