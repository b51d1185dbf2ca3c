#include "thimac/model_index.hpp"

namespace thimac {

ModelIndex::ModelIndex(const Model& model) : model_(&model) {
  for (const auto& m : model.machines) add_machine(m, Path{m.name}, std::nullopt);

  for (std::size_t mi = 0; mi < machines_.size(); ++mi)
    for (const auto& f : machines_[mi].machine->flows) flows_.push_back(FlowNode{&f, mi, {}, {}});
  for (const auto& f : model.flows) flows_.push_back(FlowNode{&f, std::nullopt, {}, {}});

  outgoing_.resize(stages_.size());
  incoming_.resize(stages_.size());
  triggers_from_.resize(stages_.size());

  for (std::size_t i = 0; i < flows_.size(); ++i) {
    auto& f = flows_[i];
    f.src = resolve_stage(f.scope, f.arc->src);
    f.dst = resolve_stage(f.scope, f.arc->dst);
    if (f.src && f.dst) {
      outgoing_[*f.src].push_back(i);
      incoming_[*f.dst].push_back(i);
    }
  }
  for (const auto& t : model.triggers) {
    TriggerNode n{&t, stage_at(t.src), stage_at(t.dst)};
    if (n.src && n.dst) triggers_from_[*n.src].push_back(triggers_.size());
    triggers_.push_back(n);
  }
}

void ModelIndex::add_machine(const Machine& m, const Path& path, std::optional<std::size_t> parent) {
  const std::size_t idx = machines_.size();
  machines_.push_back(MachineNode{path, &m, parent});
  machine_by_path_.emplace(path, idx);
  for (const auto& s : m.stages) {
    stage_by_path_.emplace(path.child(s.name), stages_.size());
    stages_.push_back(StageNode{path.child(s.name), &s, idx});
  }
  for (const auto& st : m.states) {
    store_by_path_.emplace(path.child(st.name), stores_.size());
    stores_.push_back(StoreNode{path.child(st.name), &st, idx});
  }
  for (const auto& sub : m.machines) add_machine(sub, path.child(sub.name), idx);
}

std::optional<std::size_t> ModelIndex::stage_at(const Path& abs) const {
  auto it = stage_by_path_.find(abs);
  if (it == stage_by_path_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> ModelIndex::machine_at(const Path& abs) const {
  auto it = machine_by_path_.find(abs);
  if (it == machine_by_path_.end()) return std::nullopt;
  return it->second;
}

namespace {

template <typename Lookup>
std::optional<std::size_t> lexical(const std::vector<ModelIndex::MachineNode>& machines,
                                   std::optional<std::size_t> scope, const Path& rel,
                                   Lookup&& lookup) {
  if (rel.empty()) return std::nullopt;
  for (auto cur = scope; cur; cur = machines[*cur].parent)
    if (auto hit = lookup(machines[*cur].path.concat(rel))) return hit;
  return lookup(rel);
}

}  // namespace

std::optional<std::size_t> ModelIndex::resolve_stage(std::optional<std::size_t> scope,
                                                     const Path& rel) const {
  return lexical(machines_, scope, rel, [this](const Path& p) { return stage_at(p); });
}

std::optional<std::size_t> ModelIndex::resolve_store(std::optional<std::size_t> scope,
                                                     const Path& rel) const {
  return lexical(machines_, scope, rel, [this](const Path& p) -> std::optional<std::size_t> {
    auto it = store_by_path_.find(p);
    if (it == store_by_path_.end()) return std::nullopt;
    return it->second;
  });
}

}  // namespace thimac
