#pragma once

#include <map>
#include <optional>
#include <vector>

#include "thimac/model.hpp"

namespace thimac {

/// Flattened, resolved view over a Model. Holds pointers into the model, so
/// the model must outlive the index and must not be mutated meanwhile.
/// Unresolvable references are kept (as nullopt) so the validator can report
/// them.
class ModelIndex {
 public:
  struct MachineNode {
    Path path;
    const Machine* machine = nullptr;
    std::optional<std::size_t> parent;
  };
  struct StageNode {
    Path path;
    const Stage* stage = nullptr;
    std::size_t machine = 0;
  };
  struct StoreNode {
    Path path;
    const StateDecl* decl = nullptr;
    std::size_t machine = 0;
  };
  struct FlowNode {
    const FlowArc* arc = nullptr;
    std::optional<std::size_t> scope;  // declaring machine; nullopt = model level
    std::optional<std::size_t> src;
    std::optional<std::size_t> dst;
  };
  struct TriggerNode {
    const TriggerArc* arc = nullptr;
    std::optional<std::size_t> src;
    std::optional<std::size_t> dst;
  };

  explicit ModelIndex(const Model& model);

  const Model& model() const { return *model_; }
  const std::vector<MachineNode>& machines() const { return machines_; }
  const std::vector<StageNode>& stages() const { return stages_; }
  const std::vector<StoreNode>& stores() const { return stores_; }
  const std::vector<FlowNode>& flows() const { return flows_; }
  const std::vector<TriggerNode>& triggers() const { return triggers_; }

  std::optional<std::size_t> stage_at(const Path& abs) const;
  std::optional<std::size_t> machine_at(const Path& abs) const;

  /// Resolves `rel` as written inside machine `scope`: tried relative to the
  /// scope, then each enclosing machine, then as an absolute path.
  std::optional<std::size_t> resolve_stage(std::optional<std::size_t> scope, const Path& rel) const;
  std::optional<std::size_t> resolve_store(std::optional<std::size_t> scope, const Path& rel) const;

  const std::vector<std::size_t>& outgoing(std::size_t stage) const { return outgoing_[stage]; }
  const std::vector<std::size_t>& incoming(std::size_t stage) const { return incoming_[stage]; }
  const std::vector<std::size_t>& triggers_from(std::size_t stage) const { return triggers_from_[stage]; }

  /// Depth of nesting; top-level machines have depth 1.
  std::size_t depth(std::size_t machine) const { return machines_[machine].path.size(); }

 private:
  void add_machine(const Machine& m, const Path& path, std::optional<std::size_t> parent);

  const Model* model_;
  std::vector<MachineNode> machines_;
  std::vector<StageNode> stages_;
  std::vector<StoreNode> stores_;
  std::vector<FlowNode> flows_;
  std::vector<TriggerNode> triggers_;
  std::map<Path, std::size_t> stage_by_path_;
  std::map<Path, std::size_t> machine_by_path_;
  std::map<Path, std::size_t> store_by_path_;
  std::vector<std::vector<std::size_t>> outgoing_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<std::vector<std::size_t>> triggers_from_;
};

}  // namespace thimac
