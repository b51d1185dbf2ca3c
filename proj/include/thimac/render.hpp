#pragma once

#include <set>
#include <string>

#include "thimac/model.hpp"

namespace thimac {

struct RenderOptions {
  /// Stage or machine paths to fill. A machine fills every stage inside it.
  std::set<Path> highlight;
  /// Machines drawn as a single node; arcs into or out of them are rerouted.
  std::set<Path> collapse;
  /// "LR" or "TB".
  std::string rankdir = "LR";
  std::string highlight_color = "gold";
  /// Stages drawn in red, used when rendering a model that failed validation.
  std::set<Path> errors;
};

/// Graphviz DOT text: one cluster per machine, flows as solid edges, triggers
/// dashed. Arcs whose ends do not resolve are left out. Throws
/// Error(unresolved_option) for highlight/collapse paths that name nothing
/// (or collapse paths that are not machines) and for a bad rankdir.
std::string render_dot(const Model& model, const RenderOptions& options = {});

}  // namespace thimac
