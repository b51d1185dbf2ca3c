#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thimac/model.hpp"

namespace thimac {

/// Location in the source text. `line` and `column` are 1-based; columns
/// count bytes. `offset` is the 0-based byte offset of the same position.
struct SourceSpan {
  std::size_t line = 1;
  std::size_t column = 1;
  std::size_t length = 0;
  std::size_t offset = 0;
};

struct ParseDiagnostic {
  SourceSpan span;
  std::string message;
  std::vector<std::string> expected;  // token descriptions, syntax errors only

  std::string format(std::string_view file = {}) const;
};

struct ParseResult {
  std::optional<Model> model;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return model.has_value(); }
};

/// Parses `.tm` text. A model is returned only when there are no
/// diagnostics. Pure: no global state is touched.
ParseResult parse(std::string_view text);

/// Canonical text: 2-space indent, one declaration per line, LF endings,
/// members grouped as states, stages, submachines, flows.
std::string serialize(const Model& model);

std::string format_expr(const Expr& e);
std::string format_action(const Action& a);

/// Words that cannot name machines or stores because they start or continue
/// an expression.
bool is_reserved_word(std::string_view s);

}  // namespace thimac
