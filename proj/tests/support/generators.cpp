#include "support/generators.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <random>

namespace thimac::testing {

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }
std::int64_t small_int(Rng& rng) { return std::uniform_int_distribution<std::int64_t>(-50, 500)(rng); }

std::string random_string(Rng& rng) {
  static const std::vector<std::string> parts = {"a", "b", "z", " ", "\"", "\\", "-", "*", "10.0.0.1", "\xc3\xa9", "syn"};
  std::string s;
  const std::size_t n = pick(rng, 5);
  for (std::size_t i = 0; i < n; ++i) s += parts[pick(rng, parts.size())];
  return s;
}

Value random_value(Rng& rng) {
  switch (pick(rng, 3)) {
    case 0: return small_int(rng);
    case 1: return chance(rng, 0.5);
    default: return random_string(rng);
  }
}

Record random_row(Rng& rng, bool wildcard) {
  Record r;
  const std::size_t n = 1 + pick(rng, 3);
  for (std::size_t i = 0; i < n; ++i)
    r["f" + std::to_string(pick(rng, 4))] = wildcard && chance(rng, 0.3) ? Value{std::string("*")} : random_value(rng);
  return r;
}

struct StoreInfo {
  Path ref;  // as written at the use site
  StoreKind kind;
};

struct GenMachine {
  Path path;
  Machine* m;
  std::vector<StoreInfo> visible;  // own and ancestor stores, by bare name
};

class ValidGen {
 public:
  explicit ValidGen(std::uint64_t seed) : rng_(seed) {}

  Model run() {
    model_.name = "gen_" + std::to_string(rng_() % 100000);
    const std::size_t tops = 1 + pick(rng_, 3);
    for (std::size_t i = 0; i < tops; ++i) model_.machines.push_back(machine(1));
    // Index machines and stages after the tree is final; pointers stay put
    // from here on.
    for (auto& m : model_.machines) index(m, Path{m.name}, {});
    intra_flows();
    crossing_flows();
    branches();
    triggers();
    return model_;
  }

 private:
  Machine machine(int depth) {
    Machine m;
    m.name = "m" + std::to_string(next_machine_++);
    const std::size_t nstates = pick(rng_, 4);
    for (std::size_t i = 0; i < nstates; ++i) {
      StateDecl s;
      s.name = "st" + std::to_string(next_store_++);
      s.kind = static_cast<StoreKind>(pick(rng_, 3));
      if (s.kind == StoreKind::counter)
        s.initial = small_int(rng_);
      else {
        const std::size_t rows = s.kind == StoreKind::rules ? 1 + pick(rng_, 3) : pick(rng_, 3);
        for (std::size_t r = 0; r < rows; ++r) s.rows.push_back(random_row(rng_, s.kind == StoreKind::rules));
      }
      m.states.push_back(std::move(s));
    }
    const std::size_t nstages = chance(rng_, 0.15) ? 0 : 1 + pick(rng_, 6);
    for (std::size_t i = 0; i < nstages; ++i) {
      Stage s;
      s.name = "s" + std::to_string(next_stage_++);
      s.kind = kStageKinds[pick(rng_, 5)];
      m.stages.push_back(std::move(s));
    }
    if (depth < 3) {
      const std::size_t subs = pick(rng_, 3);
      for (std::size_t i = 0; i < subs; ++i) m.machines.push_back(machine(depth + 1));
    }
    return m;
  }

  void index(Machine& m, const Path& path, std::vector<StoreInfo> visible) {
    for (const auto& s : m.states) visible.push_back(StoreInfo{Path{s.name}, s.kind});
    const std::size_t me = machines_.size();
    machines_.push_back(GenMachine{path, &m, visible});
    parent_.push_back(std::nullopt);
    for (auto& s : m.stages) {
      stage_machine_.push_back(me);
      stage_path_.push_back(path.child(s.name));
      stages_.push_back(&s);
    }
    for (auto& c : m.machines) {
      const std::size_t child = machines_.size();
      index(c, path.child(c.name), visible);
      parent_[child] = me;
    }
  }

  void add_out(std::size_t from, std::size_t to) { out_[from].push_back(to); }

  void intra_flows() {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      const std::size_t want = pick(rng_, 3);
      std::vector<std::size_t> cands;
      for (std::size_t j = 0; j < stages_.size(); ++j)
        if (stage_machine_[j] == stage_machine_[i] && default_adjacency().permits(stages_[i]->kind, stages_[j]->kind))
          cands.push_back(j);
      std::shuffle(cands.begin(), cands.end(), rng_);
      for (std::size_t k = 0; k < std::min(want, cands.size()); ++k) {
        Machine* m = machines_[stage_machine_[i]].m;
        m->flows.push_back(FlowArc{Path{stages_[i]->name}, Path{stages_[cands[k]]->name}});
        add_out(i, cands[k]);
      }
    }
  }

  std::vector<std::size_t> transfers_of(std::size_t machine) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < stages_.size(); ++i)
      if (stage_machine_[i] == machine && stages_[i]->kind == StageKind::transfer) out.push_back(i);
    return out;
  }

  void crossing_flows() {
    // Between a machine and its children, and between siblings.
    std::map<std::optional<std::size_t>, std::vector<std::size_t>> children;
    for (std::size_t m = 0; m < machines_.size(); ++m) children[parent_[m]].push_back(m);
    for (auto& [parent, kids] : children) {
      std::vector<std::size_t> group = kids;
      if (parent) group.push_back(*parent);
      for (std::size_t a : group)
        for (std::size_t b : group) {
          if (a == b || !chance(rng_, 0.4)) continue;
          auto ta = transfers_of(a), tb = transfers_of(b);
          if (ta.empty() || tb.empty()) continue;
          const std::size_t s = ta[pick(rng_, ta.size())], d = tb[pick(rng_, tb.size())];
          if (parent) {
            // Written inside the parent, relative to it.
            const Path& base = machines_[*parent].path;
            auto rel = [&](std::size_t st) {
              return Path{std::vector<std::string>(stage_path_[st].segments.begin() + base.size(),
                                                   stage_path_[st].segments.end())};
            };
            machines_[*parent].m->flows.push_back(FlowArc{rel(s), rel(d)});
          } else {
            model_.flows.push_back(FlowArc{stage_path_[s], stage_path_[d]});
          }
          add_out(s, d);
        }
    }
  }

  Expr scalar(const std::vector<StoreInfo>& visible, bool allow_store = true) {
    std::vector<const StoreInfo*> counters;
    for (const auto& s : visible)
      if (s.kind == StoreKind::counter) counters.push_back(&s);
    const std::size_t r = pick(rng_, 3);
    if (r == 0) return Expr::attr("a" + std::to_string(pick(rng_, 4)));
    if (r == 1 && allow_store && !counters.empty()) return Expr::store_ref(counters[pick(rng_, counters.size())]->ref);
    return Expr::literal(random_value(rng_));
  }

  Expr int_operand(const std::vector<StoreInfo>& visible) {
    std::vector<const StoreInfo*> counters;
    for (const auto& s : visible)
      if (s.kind == StoreKind::counter) counters.push_back(&s);
    const std::size_t r = pick(rng_, 3);
    if (r == 0) return Expr::attr("a" + std::to_string(pick(rng_, 4)));
    if (r == 1 && !counters.empty()) return Expr::store_ref(counters[pick(rng_, counters.size())]->ref);
    return Expr::literal(small_int(rng_));
  }

  Expr record(const std::vector<StoreInfo>& visible) {
    std::vector<std::pair<std::string, Expr>> fields;
    std::set<std::string> seen;
    const std::size_t n = 1 + pick(rng_, 3);
    for (std::size_t i = 0; i < n; ++i) {
      std::string k = "f" + std::to_string(pick(rng_, 4));
      if (!seen.insert(k).second) continue;
      fields.emplace_back(k, scalar(visible));
    }
    return Expr::make_record(std::move(fields));
  }

  Expr guard(const std::vector<StoreInfo>& visible, int depth = 0) {
    std::vector<const StoreInfo*> lookups;
    for (const auto& s : visible)
      if (s.kind != StoreKind::counter) lookups.push_back(&s);
    const std::size_t r = depth > 3 ? pick(rng_, 4) : pick(rng_, 8);
    switch (r) {
      case 0: return Expr::literal(chance(rng_, 0.5));
      case 1: return Expr::has("a" + std::to_string(pick(rng_, 4)));
      case 2: {
        static const ExprOp eqs[] = {ExprOp::eq, ExprOp::ne};
        return Expr::binary(eqs[pick(rng_, 2)], Expr::attr("a" + std::to_string(pick(rng_, 4))), scalar(visible));
      }
      case 3: {
        static const ExprOp ords[] = {ExprOp::lt, ExprOp::le, ExprOp::gt, ExprOp::ge};
        return Expr::binary(ords[pick(rng_, 4)], int_operand(visible), int_operand(visible));
      }
      case 4:
        if (!lookups.empty()) return Expr::member(record(visible), lookups[pick(rng_, lookups.size())]->ref);
        return Expr::literal(false);
      case 5: return Expr::negate(guard(visible, depth + 1));
      case 6: return Expr::binary(chance(rng_, 0.5) ? ExprOp::and_ : ExprOp::or_, guard(visible, depth + 1),
                                  guard(visible, depth + 1));
      default:
        // A parenthesised boolean compared with a literal.
        return Expr::binary(ExprOp::eq, guard(visible, depth + 1), Expr::literal(chance(rng_, 0.5)));
    }
  }

  Action action(const std::vector<StoreInfo>& visible) {
    std::vector<const StoreInfo*> counters, tables;
    for (const auto& s : visible) {
      if (s.kind == StoreKind::counter) counters.push_back(&s);
      if (s.kind == StoreKind::table) tables.push_back(&s);
    }
    switch (pick(rng_, 6)) {
      case 0:
        if (!counters.empty()) return Action::incr(counters[pick(rng_, counters.size())]->ref);
        return Action::noop();
      case 1:
        if (!tables.empty()) return Action::insert(tables[pick(rng_, tables.size())]->ref, record(visible));
        return Action::noop();
      case 2: return Action::set("a" + std::to_string(pick(rng_, 4)), scalar(visible));
      case 3: return Action::log(scalar(visible));
      case 4: return chance(rng_, 0.3) ? Action::drop() : Action::noop();
      default: return Action::noop();
    }
  }

  Path target_path(std::size_t from, std::size_t to) const {
    if (stage_machine_[from] == stage_machine_[to]) return Path{stages_[to]->name};
    return stage_path_[to];
  }

  void branches() {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      const auto& vis = machines_[stage_machine_[i]].visible;
      Stage& s = *stages_[i];
      const std::size_t nact = pick(rng_, 3);
      for (std::size_t k = 0; k < nact; ++k) s.actions.push_back(action(vis));
      auto outs = out_[i];
      std::sort(outs.begin(), outs.end());
      outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
      if (outs.empty()) continue;
      if (outs.size() == 1 && out_[i].size() == 1 && !chance(rng_, 0.3)) continue;
      for (std::size_t o : outs) {
        Branch b{guard(vis), target_path(i, o), {}};
        if (chance(rng_, 0.3)) b.actions.push_back(action(vis));
        s.branches.push_back(std::move(b));
      }
      s.branches.push_back(Branch{Expr::literal(true), target_path(i, outs[pick(rng_, outs.size())]), {}});
    }
  }

  void triggers() {
    std::vector<std::size_t> dsts;
    for (std::size_t i = 0; i < stages_.size(); ++i)
      if (stages_[i]->kind == StageKind::create || stages_[i]->kind == StageKind::transfer) dsts.push_back(i);
    if (dsts.empty() || stages_.empty()) return;
    // Root scope: counters only by absolute path.
    std::vector<StoreInfo> absolute;
    for (const auto& gm : machines_)
      for (const auto& s : gm.m->states)
        if (s.kind == StoreKind::counter) absolute.push_back(StoreInfo{gm.path.child(s.name), s.kind});
    const std::size_t n = pick(rng_, 4);
    for (std::size_t k = 0; k < n; ++k) {
      TriggerArc t;
      t.src = stage_path_[pick(rng_, stages_.size())];
      t.dst = stage_path_[dsts[pick(rng_, dsts.size())]];
      if (chance(rng_, 0.5)) t.guard = guard(absolute, 2);
      if (chance(rng_, 0.6)) {
        ThingTemplate tpl;
        tpl.type = "t" + std::to_string(pick(rng_, 5));
        const std::size_t nf = pick(rng_, 3);
        for (std::size_t f = 0; f < nf; ++f) tpl.attrs.emplace_back("k" + std::to_string(f), scalar(absolute));
        t.emit = std::move(tpl);
      }
      model_.triggers.push_back(std::move(t));
    }
  }

  Rng rng_;
  Model model_;
  std::size_t next_machine_ = 0, next_stage_ = 0, next_store_ = 0;
  std::vector<GenMachine> machines_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<Stage*> stages_;
  std::vector<std::size_t> stage_machine_;
  std::vector<Path> stage_path_;
  std::map<std::size_t, std::vector<std::size_t>> out_;
};

}  // namespace

Model random_valid_model(std::uint64_t seed) { return ValidGen(seed).run(); }

GuardFreeCase random_guard_free_model(std::uint64_t seed, std::size_t max_stages) {
  Rng rng(seed);
  GuardFreeCase c;
  Model& model = c.model;
  model.name = "oracle_" + std::to_string(seed);
  const std::size_t machines = 1 + pick(rng, 4);
  std::size_t budget = max_stages;
  for (std::size_t i = 0; i < machines && budget > 0; ++i) {
    Machine m;
    m.name = "m" + std::to_string(i);
    const std::size_t n = std::min<std::size_t>(budget, 2 + pick(rng, 7));
    budget -= n;
    for (std::size_t k = 0; k < n; ++k)
      m.stages.push_back(Stage{"s" + std::to_string(k), kStageKinds[pick(rng, 5)], {}, {}});
    model.machines.push_back(std::move(m));
  }
  // At most one outgoing flow per stage.
  for (std::size_t mi = 0; mi < model.machines.size(); ++mi) {
    Machine& m = model.machines[mi];
    for (const auto& s : m.stages) {
      if (!chance(rng, 0.8)) continue;
      std::vector<std::pair<std::size_t, std::string>> cands;  // (machine, stage)
      for (const auto& t : m.stages)
        if (default_adjacency().permits(s.kind, t.kind)) cands.emplace_back(mi, t.name);
      if (s.kind == StageKind::transfer)
        for (std::size_t mj = 0; mj < model.machines.size(); ++mj)
          if (mj != mi)
            for (const auto& t : model.machines[mj].stages)
              if (t.kind == StageKind::transfer) cands.emplace_back(mj, t.name);
      if (cands.empty()) continue;
      auto [tm, tn] = cands[pick(rng, cands.size())];
      if (tm == mi)
        m.flows.push_back(FlowArc{Path{s.name}, Path{tn}});
      else
        model.flows.push_back(FlowArc{Path{m.name, s.name}, Path{model.machines[tm].name, tn}});
    }
  }
  std::vector<StagePath> entries;
  for (const auto& m : model.machines)
    for (const auto& s : m.stages)
      if (s.kind == StageKind::transfer || s.kind == StageKind::create) entries.push_back(Path{m.name, s.name});
  if (entries.empty()) {
    // Guarantee an entry point.
    model.machines[0].stages.push_back(Stage{"entry", StageKind::transfer, {}, {}});
    entries.push_back(Path{model.machines[0].name, "entry"});
  }
  c.inject_at = entries[pick(rng, entries.size())];
  return c;
}

std::set<std::string> independent_reachable(const Model& model, const StagePath& from) {
  std::set<std::string> stages;
  std::map<std::string, std::vector<std::string>> edges;
  std::vector<std::pair<Path, const Machine*>> all;
  std::function<void(const Machine&, const Path&)> walk = [&](const Machine& m, const Path& p) {
    all.emplace_back(p, &m);
    for (const auto& s : m.stages) stages.insert(p.child(s.name).str());
    for (const auto& c : m.machines) walk(c, p.child(c.name));
  };
  for (const auto& m : model.machines) walk(m, Path{m.name});
  auto resolve_from = [&](Path scope, const Path& rel) -> std::string {
    while (!scope.empty()) {
      const std::string cand = scope.concat(rel).str();
      if (stages.count(cand)) return cand;
      scope = scope.parent();
    }
    return rel.str();
  };
  for (const auto& [p, m] : all)
    for (const auto& f : m->flows) edges[resolve_from(p, f.src)].push_back(resolve_from(p, f.dst));
  for (const auto& f : model.flows) edges[f.src.str()].push_back(f.dst.str());

  std::set<std::string> seen{from.str()};
  std::deque<std::string> work{from.str()};
  while (!work.empty()) {
    const std::string cur = work.front();
    work.pop_front();
    for (const auto& n : edges[cur])
      if (stages.count(n) && seen.insert(n).second) work.push_back(n);
  }
  return seen;
}

}  // namespace thimac::testing
