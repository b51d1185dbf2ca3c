#pragma once

#include <string>
#include <vector>

#include "thimac/model.hpp"

namespace thimac {

enum class Severity { error, warning };

/// A structural finding. `code` (V1..V9) is stable API; `message` is not.
struct Diagnostic {
  std::string code;
  Severity severity = Severity::error;
  Path path;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

std::string_view to_string(Severity s);

/// Checks the well-formedness rules and returns every finding, grouped by
/// rule code and then in declaration order. Pure function of the model.
///
///   V1 intra-machine flow outside the adjacency table        error
///   V2 boundary-crossing flow not through transfer stages    error
///   V3 duplicate or shadowed names                           error
///   V4 exits not covered by exhaustive ordered branches      error
///      overlapping or unreachable branches                   warning
///   V5 dangling path in an arc, branch or template           error
///   V6 trigger aimed at a stage that is not create/transfer  error
///   V7 undeclared (or wrongly kinded) store reference        error
///   V8 receive stage with no flow from a transfer stage      warning
///   V9 stage unreachable from every transfer/create stage    warning
std::vector<Diagnostic> validate(const Model& model, const AdjacencyTable& adjacency = default_adjacency());

bool has_errors(const std::vector<Diagnostic>& diags);

/// One JSON object per line: code, message, path, severity (sorted keys).
std::string to_json_line(const Diagnostic& d);

std::string format(const Diagnostic& d);

}  // namespace thimac
