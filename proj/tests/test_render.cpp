#include <algorithm>
#include <regex>

#include "oracles.hpp"
#include "test_util.hpp"
#include "thimac/render.hpp"
#include "thimac/sim.hpp"

using namespace thimac;
using namespace thimac::testing;

namespace {

std::size_t count_lines(const std::string& dot, const std::string& needle) {
  std::size_t n = 0;
  std::istringstream in(dot);
  for (std::string line; std::getline(in, line);) n += line.find(needle) != std::string::npos;
  return n;
}

std::set<Path> stages_of(const Trace& t) {
  std::set<Path> out;
  for (const auto& ev : t.events) out.insert(ev.stage);
  return out;
}

}  // namespace

TEST(Render, GenericMatchesOracle) { EXPECT_EQ(render_dot(corpus_model("generic/thimac.tm")), oracle::kGenericDot); }

TEST(Render, EmptyModel) {
  Model m;
  m.name = "empty";
  EXPECT_EQ(render_dot(m), "digraph \"empty\" {\n  rankdir=LR;\n}\n");
}

TEST(Render, RankdirOption) {
  RenderOptions o;
  o.rankdir = "TB";
  EXPECT_NE(render_dot(corpus_model("generic/thimac.tm"), o).find("rankdir=TB;"), std::string::npos);
  o.rankdir = "RL";
  try {
    render_dot(corpus_model("generic/thimac.tm"), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unresolved_option);
  }
}

TEST(Render, UnresolvedHighlightAndCollapse) {
  Model m = corpus_model("part_a/asa.tm");
  RenderOptions a;
  a.highlight = {P("asa.nope")};
  EXPECT_THROW(render_dot(m, a), Error);
  RenderOptions b;
  b.collapse = {P("asa.acl.compare")};  // a stage, not a machine
  EXPECT_THROW(render_dot(m, b), Error);
}

TEST(Render, NodeAndEdgeCounts) {
  for (const auto& c : oracle::kCorpusCounts) {
    const std::string dot = render_dot(corpus_model(c.file));
    EXPECT_EQ(count_lines(dot, "[label=\""), c.stages) << c.file;
    EXPECT_EQ(count_lines(dot, "subgraph \"cluster_"), c.machines) << c.file;
    EXPECT_EQ(count_lines(dot, " -> "), c.flows + c.triggers) << c.file;
    EXPECT_EQ(count_lines(dot, "[style=dashed]"), c.triggers) << c.file;
  }
}

TEST(Render, TriggersDashedFlowsSolid) {
  const std::string dot = render_dot(corpus_model("part_a/asa.tm"));
  std::istringstream in(dot);
  for (std::string line; std::getline(in, line);) {
    if (line.find(" -> ") == std::string::npos) continue;
    const bool to_log = line.find("-> \"asa.log.create_entry\"") != std::string::npos;
    EXPECT_EQ(line.find("style=dashed") != std::string::npos, to_log) << line;
  }
}

TEST(Render, DropPathHighlightGolden) {
  auto m = std::make_shared<const Model>(corpus_model("part_a/asa.tm"));
  Simulator sim(m);
  sim.inject(P("asa.ingress.transfer_in"), "packet",
             {{"src", std::string("198.51.100.20")}, {"dst", std::string("10.0.0.5")},
              {"tcp_flag", std::string("ack")}, {"proto", std::string("tcp")}, {"payload_len", std::int64_t{40}}});
  RenderOptions o;
  o.highlight = stages_of(sim.run());
  const std::string dot = render_dot(*m, o);
  EXPECT_EQ(count_lines(dot, "fillcolor=\"gold\""), o.highlight.size());
  EXPECT_EQ(dot, slurp(std::filesystem::path(THIMAC_TEST_DIR) / "golden/asa_drop_path.dot"));
}

TEST(Render, HighlightMachineFillsAllItsStages) {
  RenderOptions o;
  o.highlight = {P("asa.acl")};
  const std::string dot = render_dot(corpus_model("part_a/asa.tm"), o);
  EXPECT_EQ(count_lines(dot, "fillcolor"), 6u);
}

TEST(Render, CollapseReroutesAndDedupes) {
  Model m = corpus_model("part_a/asa.tm");
  RenderOptions o;
  o.collapse = {P("asa.acl")};
  const std::string dot = render_dot(m, o);
  EXPECT_EQ(count_lines(dot, "\"asa.acl\" [label=\"machine: acl\", shape=box3d]"), 1u);
  EXPECT_EQ(dot.find("\"asa.acl."), std::string::npos);
  EXPECT_EQ(count_lines(dot, "\"asa.tcp_state.transfer_out\" -> \"asa.acl\";"), 1u);
  EXPECT_EQ(count_lines(dot, "\"asa.acl\" -> \"asa.translation.transfer_in\";"), 1u);
  EXPECT_EQ(count_lines(dot, "\"asa.acl\" -> \"asa.log.create_entry\" [style=dashed];"), 1u);
  EXPECT_EQ(count_lines(dot, "\"asa.acl\" -> \"asa.acl\""), 0u);
}

TEST(Render, CollapseTopLevel) {
  RenderOptions o;
  o.collapse = {P("asa")};
  const std::string dot = render_dot(corpus_model("part_a/asa.tm"), o);
  EXPECT_EQ(count_lines(dot, " -> "), 0u);
  EXPECT_EQ(count_lines(dot, "shape=box3d"), 1u);
}

TEST(Render, ErrorStagesRed) {
  RenderOptions o;
  o.errors = {P("thimac.release")};
  const std::string dot = render_dot(corpus_model("generic/thimac.tm"), o);
  EXPECT_EQ(count_lines(dot, "color=red, fontcolor=red"), 1u);
}

TEST(Render, Deterministic) {
  Model m = corpus_model("part_b/internal.tm");
  EXPECT_EQ(render_dot(m), render_dot(m));
}

TEST(Render, QuotesNames) {
  Model m;
  m.name = "a \"b\"";
  EXPECT_EQ(render_dot(m).substr(0, 18), "digraph \"a \\\"b\\\"\" ");
}
