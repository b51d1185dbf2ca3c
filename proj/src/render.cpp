#include "thimac/render.hpp"

#include <map>
#include <optional>
#include <vector>

#include "thimac/model_index.hpp"

namespace thimac {

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

class DotWriter {
 public:
  DotWriter(const Model& model, const RenderOptions& opt) : index_(model), opt_(opt) {
    if (opt.rankdir != "LR" && opt.rankdir != "TB")
      throw Error(Errc::unresolved_option, "rankdir must be LR or TB, not '" + opt.rankdir + "'");
    for (const auto& p : opt.collapse)
      if (!index_.machine_at(p)) throw Error(Errc::unresolved_option, "--collapse: no machine '" + p.str() + "'");
    for (const auto& p : opt.highlight)
      if (!index_.machine_at(p) && !index_.stage_at(p))
        throw Error(Errc::unresolved_option, "--highlight: no stage or machine '" + p.str() + "'");
  }

  std::string run() {
    out_ = "digraph " + quote(index_.model().name) + " {\n";
    out_ += "  rankdir=" + opt_.rankdir + ";\n";
    if (!index_.machines().empty()) out_ += "  node [shape=box];\n";
    for (std::size_t m = 0; m < index_.machines().size(); ++m)
      if (!index_.machines()[m].parent) machine(m, 1);
    edges();
    out_ += "}\n";
    return out_;
  }

 private:
  // Outermost collapsed machine enclosing `p`, if any.
  std::optional<Path> collapsed_owner(const Path& p) const {
    for (std::size_t n = 1; n <= p.size(); ++n) {
      Path prefix{std::vector<std::string>(p.segments.begin(), p.segments.begin() + n)};
      if (opt_.collapse.count(prefix)) return prefix;
    }
    return std::nullopt;
  }

  bool highlighted(const Path& p) const {
    for (std::size_t n = 1; n <= p.size(); ++n) {
      Path prefix{std::vector<std::string>(p.segments.begin(), p.segments.begin() + n)};
      if (opt_.highlight.count(prefix)) return true;
    }
    return false;
  }

  std::string node_attrs(std::string label, bool hi, bool err, bool box3d) const {
    std::string a = "label=" + quote(label);
    if (box3d) a += ", shape=box3d";
    if (err)
      a += ", color=red, fontcolor=red";
    if (hi) a += ", style=filled, fillcolor=" + quote(opt_.highlight_color);
    return " [" + a + "]";
  }

  void machine(std::size_t m, int depth) {
    const auto& node = index_.machines()[m];
    const std::string pad(2 * depth, ' ');
    if (opt_.collapse.count(node.path)) {
      bool hi = highlighted(node.path), err = false;
      for (const auto& s : index_.stages())
        if (s.path.starts_with(node.path)) {
          hi = hi || highlighted(s.path);
          err = err || opt_.errors.count(s.path);
        }
      out_ += pad + quote(node.path.str()) + node_attrs("machine: " + node.machine->name, hi, err, true) + ";\n";
      return;
    }
    out_ += pad + "subgraph " + quote("cluster_" + node.path.str()) + " {\n";
    out_ += pad + "  label=" + quote(node.machine->name) + ";\n";
    for (const auto& s : index_.stages()) {
      if (s.machine != m) continue;
      out_ += pad + "  " + quote(s.path.str()) +
              node_attrs(std::string(to_string(s.stage->kind)) + ": " + s.stage->name, highlighted(s.path),
                         opt_.errors.count(s.path) > 0, false) +
              ";\n";
    }
    for (std::size_t c = 0; c < index_.machines().size(); ++c)
      if (index_.machines()[c].parent == m) machine(c, depth + 1);
    out_ += pad + "}\n";
  }

  std::string endpoint(std::size_t stage) const {
    const Path& p = index_.stages()[stage].path;
    if (auto owner = collapsed_owner(p)) return owner->str();
    return p.str();
  }

  void edge(std::optional<std::size_t> src, std::optional<std::size_t> dst, bool dashed) {
    if (!src || !dst) return;
    const std::string a = endpoint(*src), b = endpoint(*dst);
    const bool a_collapsed = a != index_.stages()[*src].path.str();
    const bool b_collapsed = b != index_.stages()[*dst].path.str();
    if (a == b && (a_collapsed || b_collapsed)) return;  // internal to a collapsed machine
    std::string line = "  " + quote(a) + " -> " + quote(b) + (dashed ? " [style=dashed]" : "") + ";\n";
    if ((a_collapsed || b_collapsed) && !seen_.insert(line).second) return;
    out_ += line;
  }

  void edges() {
    for (const auto& f : index_.flows()) edge(f.src, f.dst, false);
    for (const auto& t : index_.triggers()) edge(t.src, t.dst, true);
  }

  ModelIndex index_;
  const RenderOptions& opt_;
  std::string out_;
  std::set<std::string> seen_;
};

}  // namespace

std::string render_dot(const Model& model, const RenderOptions& options) {
  return DotWriter(model, options).run();
}

}  // namespace thimac
