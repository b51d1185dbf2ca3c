#include "thimac/validate.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include <json.hpp>

#include "thimac/dsl.hpp"
#include "thimac/model_index.hpp"

namespace thimac {

namespace {

class Checker {
 public:
  Checker(const Model& model, const AdjacencyTable& adjacency) : index_(model), adjacency_(adjacency) {}

  std::vector<Diagnostic> run() {
    flows();           // V1, V2
    names();           // V3
    branches();        // V4 (+ V5 for branch targets)
    dangling();        // V5
    trigger_kinds();   // V6
    stores();          // V7 (+ V5 for template store refs)
    receives();        // V8
    reachability();    // V9
    std::stable_sort(out_.begin(), out_.end(), [](const Diagnostic& a, const Diagnostic& b) {
      return a.code.size() != b.code.size() ? a.code.size() < b.code.size() : a.code < b.code;
    });
    return std::move(out_);
  }

 private:
  void report(const char* code, Severity sev, Path path, std::string message) {
    out_.push_back(Diagnostic{code, sev, std::move(path), std::move(message)});
  }

  const ModelIndex::StageNode& stage(std::size_t i) const { return index_.stages()[i]; }
  StageKind kind(std::size_t i) const { return stage(i).stage->kind; }

  static std::string arc_text(const FlowArc& f) { return f.src.str() + " -> " + f.dst.str(); }

  // Machines from `m` up to, but not including, `stop` (a proper ancestor or
  // nullopt for the model root).
  std::vector<std::size_t> chain(std::size_t m, std::optional<std::size_t> stop) const {
    std::vector<std::size_t> out;
    for (std::optional<std::size_t> cur = m; cur && cur != stop; cur = index_.machines()[*cur].parent)
      out.push_back(*cur);
    return out;
  }

  std::optional<std::size_t> common_ancestor(std::size_t a, std::size_t b) const {
    std::set<std::size_t> up;
    for (std::optional<std::size_t> cur = a; cur; cur = index_.machines()[*cur].parent) up.insert(*cur);
    for (std::optional<std::size_t> cur = b; cur; cur = index_.machines()[*cur].parent)
      if (up.count(*cur)) return cur;
    return std::nullopt;
  }

  bool container(std::size_t m) const { return index_.machines()[m].machine->stages.empty(); }

  void flows() {
    for (const auto& f : index_.flows()) {
      if (!f.src || !f.dst) continue;
      const std::size_t sm = stage(*f.src).machine;
      const std::size_t dm = stage(*f.dst).machine;
      const Path& at = stage(*f.src).path;
      if (sm == dm) {
        if (!adjacency_.permits(kind(*f.src), kind(*f.dst)))
          report("V1", Severity::error, at,
                 "flow " + arc_text(*f.arc) + ": " + std::string(to_string(kind(*f.src))) + " -> " +
                     std::string(to_string(kind(*f.dst))) + " is not a legal flow inside a machine");
        continue;
      }
      const auto lca = common_ancestor(sm, dm);
      const auto up = chain(sm, lca);
      const auto down = chain(dm, lca);
      auto crossing_ok = [&](const std::vector<std::size_t>& c, std::size_t end) {
        if (c.empty()) return true;
        if (kind(end) != StageKind::transfer) return false;
        return std::all_of(c.begin() + 1, c.end(), [&](std::size_t m) { return container(m); });
      };
      if (!crossing_ok(up, *f.src))
        report("V2", Severity::error, at,
               "flow " + arc_text(*f.arc) + " leaves machine '" + index_.machines()[sm].path.str() +
                   "' without passing through a transfer stage");
      else if (!crossing_ok(down, *f.dst))
        report("V2", Severity::error, at,
               "flow " + arc_text(*f.arc) + " enters machine '" + index_.machines()[dm].path.str() +
                   "' without passing through a transfer stage");
    }
  }

  void names() {
    const Model& model = index_.model();
    std::set<std::string> top;
    for (const auto& m : model.machines)
      if (!top.insert(m.name).second)
        report("V3", Severity::error, Path{m.name}, "duplicate machine name '" + m.name + "'");

    for (const auto& node : index_.machines()) {
      const Machine& m = *node.machine;
      std::set<std::string> stages, subs, states;
      for (const auto& s : m.stages)
        if (!stages.insert(s.name).second)
          report("V3", Severity::error, node.path.child(s.name), "duplicate stage name '" + s.name + "'");
      for (const auto& sub : m.machines) {
        if (!subs.insert(sub.name).second)
          report("V3", Severity::error, node.path.child(sub.name), "duplicate machine name '" + sub.name + "'");
        if (stages.count(sub.name))
          report("V3", Severity::error, node.path.child(sub.name),
                 "'" + sub.name + "' names both a stage and a machine");
      }
      for (const auto& st : m.states)
        if (!states.insert(st.name).second)
          report("V3", Severity::error, node.path.child(st.name), "duplicate store name '" + st.name + "'");
    }

    for (const auto& store : index_.stores()) {
      for (auto cur = index_.machines()[store.machine].parent; cur; cur = index_.machines()[*cur].parent) {
        if (index_.machines()[*cur].machine->find_state(store.decl->name)) {
          report("V3", Severity::error, store.path,
                 "store '" + store.decl->name + "' shadows the store of the same name in '" +
                     index_.machines()[*cur].path.str() + "'");
          break;
        }
      }
    }
  }

  void branches() {
    for (std::size_t si = 0; si < index_.stages().size(); ++si) {
      const auto& node = stage(si);
      const Stage& s = *node.stage;
      const auto& outs = index_.outgoing(si);
      if (outs.size() < 2 && s.branches.empty()) continue;

      std::set<std::size_t> exits;
      for (auto fi : outs) exits.insert(*index_.flows()[fi].dst);

      std::set<std::size_t> covered;
      bool fallback = false;
      for (std::size_t bi = 0; bi < s.branches.size(); ++bi) {
        const Branch& b = s.branches[bi];
        if (fallback)
          report("V4", Severity::warning, node.path,
                 "branch " + std::to_string(bi + 1) + " can never fire: an earlier branch is 'when true'");
        for (std::size_t prev = 0; prev < bi && !fallback; ++prev)
          if (s.branches[prev].guard == b.guard) {
            report("V4", Severity::warning, node.path,
                   "branches " + std::to_string(prev + 1) + " and " + std::to_string(bi + 1) +
                       " have overlapping guards");
            break;
          }
        if (b.guard.is_true_literal()) fallback = true;

        auto target = index_.resolve_stage(node.machine, b.target);
        if (!target) {
          report("V5", Severity::error, node.path, "branch target '" + b.target.str() + "' does not resolve");
        } else if (!exits.count(*target)) {
          report("V5", Severity::error, node.path,
                 "branch target '" + b.target.str() + "' is not the end of a flow leaving this stage");
        } else {
          covered.insert(*target);
        }
      }
      if (!fallback)
        report("V4", Severity::error, node.path,
               std::to_string(outs.size()) + " exit(s) with " + std::to_string(s.branches.size()) +
                   " branch(es) but no 'when true' fallback");
      for (auto e : exits)
        if (!covered.count(e))
          report("V4", Severity::error, node.path,
                 "exit to '" + stage(e).path.str() + "' is not covered by any branch");
    }
  }

  void dangling() {
    for (const auto& f : index_.flows()) {
      Path scope = f.scope ? index_.machines()[*f.scope].path : Path{};
      if (!f.src)
        report("V5", Severity::error, scope.concat(f.arc->src),
               "flow " + arc_text(*f.arc) + ": source '" + f.arc->src.str() + "' does not resolve");
      if (!f.dst)
        report("V5", Severity::error, f.src ? stage(*f.src).path : scope.concat(f.arc->src),
               "flow " + arc_text(*f.arc) + ": destination '" + f.arc->dst.str() + "' does not resolve");
    }
    for (const auto& t : index_.triggers()) {
      if (!t.src) report("V5", Severity::error, t.arc->src, "trigger source '" + t.arc->src.str() + "' does not resolve");
      if (!t.dst)
        report("V5", Severity::error, t.arc->src, "trigger destination '" + t.arc->dst.str() + "' does not resolve");
    }
  }

  void trigger_kinds() {
    for (const auto& t : index_.triggers()) {
      if (!t.dst) continue;
      auto k = kind(*t.dst);
      if (k != StageKind::create && k != StageKind::transfer)
        report("V6", Severity::error, t.arc->src,
               "trigger " + t.arc->src.str() + " -> " + t.arc->dst.str() + " targets a " +
                   std::string(to_string(k)) + " stage; triggers must start at create or transfer");
    }
  }

  void check_store(std::optional<std::size_t> scope, const Path& at, const Path& ref, StoreKind want1,
                   std::optional<StoreKind> want2, const char* missing_code) {
    auto hit = index_.resolve_store(scope, ref);
    if (!hit) {
      report(missing_code, Severity::error, at, "reference to undeclared store '" + ref.str() + "'");
      return;
    }
    const auto k = index_.stores()[*hit].decl->kind;
    if (k != want1 && (!want2 || k != *want2)) {
      std::string want = std::string(to_string(want1)) + (want2 ? " or " + std::string(to_string(*want2)) : "");
      report("V7", Severity::error, at,
             "'" + ref.str() + "' is a " + std::string(to_string(k)) + " store; no " + want + " store of that name is declared");
    }
  }

  void check_expr(std::optional<std::size_t> scope, const Path& at, const Expr& e, const char* missing_code) {
    if (e.op == ExprOp::store) check_store(scope, at, e.store, StoreKind::counter, std::nullopt, missing_code);
    if (e.op == ExprOp::in) check_store(scope, at, e.store, StoreKind::table, StoreKind::rules, missing_code);
    for (const auto& a : e.args) check_expr(scope, at, a, missing_code);
  }

  void check_action(std::optional<std::size_t> scope, const Path& at, const Action& a) {
    if (a.op == ActionOp::incr) check_store(scope, at, a.store, StoreKind::counter, std::nullopt, "V7");
    if (a.op == ActionOp::insert) check_store(scope, at, a.store, StoreKind::table, std::nullopt, "V7");
    check_expr(scope, at, a.expr, "V7");
  }

  void stores() {
    for (const auto& node : index_.stages()) {
      for (const auto& a : node.stage->actions) check_action(node.machine, node.path, a);
      for (const auto& b : node.stage->branches) {
        check_expr(node.machine, node.path, b.guard, "V7");
        for (const auto& a : b.actions) check_action(node.machine, node.path, a);
      }
    }
    for (const auto& t : index_.triggers()) {
      if (t.arc->guard) check_expr(std::nullopt, t.arc->src, *t.arc->guard, "V7");
      if (t.arc->emit)
        for (const auto& [name, e] : t.arc->emit->attrs) check_expr(std::nullopt, t.arc->src, e, "V5");
    }
  }

  void receives() {
    for (std::size_t si = 0; si < index_.stages().size(); ++si) {
      if (kind(si) != StageKind::receive) continue;
      const auto& in = index_.incoming(si);
      bool fed = std::any_of(in.begin(), in.end(),
                             [&](std::size_t fi) { return kind(*index_.flows()[fi].src) == StageKind::transfer; });
      if (!fed)
        report("V8", Severity::warning, stage(si).path, "receive stage has no incoming flow from a transfer stage");
    }
  }

  void reachability() {
    const std::size_t n = index_.stages().size();
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> work;
    for (std::size_t si = 0; si < n; ++si)
      if (kind(si) == StageKind::transfer || kind(si) == StageKind::create) {
        seen[si] = true;
        work.push_back(si);
      }
    while (!work.empty()) {
      auto cur = work.front();
      work.pop_front();
      auto visit = [&](std::size_t next) {
        if (!seen[next]) {
          seen[next] = true;
          work.push_back(next);
        }
      };
      for (auto fi : index_.outgoing(cur)) visit(*index_.flows()[fi].dst);
      for (auto ti : index_.triggers_from(cur)) visit(*index_.triggers()[ti].dst);
    }
    for (std::size_t si = 0; si < n; ++si)
      if (!seen[si])
        report("V9", Severity::warning, stage(si).path, "stage is unreachable from every transfer and create stage");
  }

  ModelIndex index_;
  const AdjacencyTable& adjacency_;
  std::vector<Diagnostic> out_;
};

}  // namespace

std::string_view to_string(Severity s) { return s == Severity::error ? "error" : "warning"; }

std::vector<Diagnostic> validate(const Model& model, const AdjacencyTable& adjacency) {
  return Checker(model, adjacency).run();
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::error; });
}

std::string to_json_line(const Diagnostic& d) {
  nlohmann::json j{{"code", d.code},
                   {"severity", std::string(to_string(d.severity))},
                   {"path", d.path.str()},
                   {"message", d.message}};
  return j.dump();
}

std::string format(const Diagnostic& d) {
  return std::string(to_string(d.severity)) + "[" + d.code + "] " + d.path.str() + ": " + d.message;
}

}  // namespace thimac
