#include "thimac/dsl.hpp"

namespace thimac {

namespace {

// Binding strength, loosest first. Operands printed below their required
// level get parentheses, which keeps the tree shape across a round-trip.
int precedence(const Expr& e) {
  switch (e.op) {
    case ExprOp::or_: return 1;
    case ExprOp::and_: return 2;
    case ExprOp::not_: return 3;
    case ExprOp::eq:
    case ExprOp::ne:
    case ExprOp::lt:
    case ExprOp::le:
    case ExprOp::gt:
    case ExprOp::ge:
    case ExprOp::in: return 4;
    default: return 5;
  }
}

std::string print(const Expr& e, int min_prec);

std::string print_record(const Expr& e) {
  std::string out = "{";
  for (std::size_t i = 0; i < e.fields.size(); ++i) {
    if (i) out += ", ";
    out += e.fields[i] + " = " + print(e.args[i], 1);
  }
  return out + "}";
}

std::string print(const Expr& e, int min_prec) {
  std::string s;
  switch (e.op) {
    case ExprOp::literal: s = format_value(e.value); break;
    case ExprOp::attr: s = "thing." + e.name; break;
    case ExprOp::has: s = "has thing." + e.name; break;
    case ExprOp::store: s = e.store.str(); break;
    case ExprOp::record: s = print_record(e); break;
    case ExprOp::or_: s = print(e.args[0], 1) + " or " + print(e.args[1], 2); break;
    case ExprOp::and_: s = print(e.args[0], 2) + " and " + print(e.args[1], 3); break;
    case ExprOp::not_: s = "not " + print(e.args[0], 3); break;
    case ExprOp::in: s = print(e.args[0], 5) + " in " + e.store.str(); break;
    default:
      s = print(e.args[0], 5) + " " + std::string(op_symbol(e.op)) + " " + print(e.args[1], 5);
      break;
  }
  if (precedence(e) < min_prec) return "(" + s + ")";
  return s;
}

std::string indent(int depth) { return std::string(static_cast<std::size_t>(depth) * 2, ' '); }

std::string format_rows(const std::vector<Record>& rows) {
  std::string out = "[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) out += ", ";
    out += format_record(rows[i]);
  }
  return out + "]";
}

void write_state(std::string& out, const StateDecl& s, int depth) {
  out += indent(depth) + "state " + std::string(to_string(s.kind)) + " " + s.name;
  switch (s.kind) {
    case StoreKind::counter: out += " = " + std::to_string(s.initial); break;
    case StoreKind::table:
      if (!s.rows.empty()) out += " = " + format_rows(s.rows);
      break;
    case StoreKind::rules: out += " = " + format_rows(s.rows); break;
  }
  out += "\n";
}

void write_stage(std::string& out, const Stage& s, int depth) {
  out += indent(depth) + "stage " + std::string(to_string(s.kind)) + " " + s.name;
  if (s.actions.empty() && s.branches.empty()) {
    out += "\n";
    return;
  }
  out += " {\n";
  for (const auto& a : s.actions) out += indent(depth + 1) + format_action(a) + "\n";
  for (const auto& b : s.branches) {
    out += indent(depth + 1) + "when " + format_expr(b.guard) + " -> " + b.target.str();
    for (std::size_t i = 0; i < b.actions.size(); ++i)
      out += (i ? ", " : " do ") + format_action(b.actions[i]);
    out += "\n";
  }
  out += indent(depth) + "}\n";
}

void write_flow(std::string& out, const FlowArc& f, int depth) {
  out += indent(depth) + "flow " + f.src.str() + " -> " + f.dst.str() + "\n";
}

void write_machine(std::string& out, const Machine& m, int depth) {
  out += indent(depth) + "machine " + m.name + " {\n";
  bool gap = false;
  auto section = [&] {
    if (gap) out += "\n";
    gap = true;
  };
  if (!m.states.empty()) {
    section();
    for (const auto& s : m.states) write_state(out, s, depth + 1);
  }
  if (!m.stages.empty()) {
    section();
    for (const auto& s : m.stages) write_stage(out, s, depth + 1);
  }
  for (const auto& sub : m.machines) {
    section();
    write_machine(out, sub, depth + 1);
  }
  if (!m.flows.empty()) {
    section();
    for (const auto& f : m.flows) write_flow(out, f, depth + 1);
  }
  out += indent(depth) + "}\n";
}

}  // namespace

std::string format_expr(const Expr& e) { return print(e, 1); }

std::string format_action(const Action& a) {
  switch (a.op) {
    case ActionOp::incr: return "incr(" + a.store.str() + ")";
    case ActionOp::insert: return "insert(" + a.store.str() + ", " + format_expr(a.expr) + ")";
    case ActionOp::set: return "set thing." + a.attr + " = " + format_expr(a.expr);
    case ActionOp::drop: return "drop";
    case ActionOp::log: return "log(" + format_expr(a.expr) + ")";
    case ActionOp::noop: return "noop";
  }
  return "noop";
}

std::string serialize(const Model& model) {
  std::string out = "model " + format_value(model.name) + " {\n";
  bool gap = false;
  auto section = [&] {
    if (gap) out += "\n";
    gap = true;
  };
  for (const auto& m : model.machines) {
    section();
    write_machine(out, m, 1);
  }
  if (!model.flows.empty()) {
    section();
    for (const auto& f : model.flows) write_flow(out, f, 1);
  }
  if (!model.triggers.empty()) {
    section();
    for (const auto& t : model.triggers) {
      out += "  trigger " + t.src.str() + " -> " + t.dst.str();
      if (t.guard) out += " when " + format_expr(*t.guard);
      if (t.emit) {
        out += " emit " + t.emit->type + " {";
        for (std::size_t i = 0; i < t.emit->attrs.size(); ++i) {
          if (i) out += ", ";
          out += t.emit->attrs[i].first + " = " + format_expr(t.emit->attrs[i].second);
        }
        out += "}";
      }
      out += "\n";
    }
  }
  return out + "}\n";
}

}  // namespace thimac
