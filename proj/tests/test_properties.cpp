#include "support/fuzz.hpp"
#include "support/generators.hpp"
#include "test_util.hpp"
#include "thimac/json_io.hpp"
#include "thimac/sim.hpp"
#include "thimac/validate.hpp"

using namespace thimac;
using namespace thimac::testing;

namespace {

std::set<std::string> visited(const GuardFreeCase& c) {
  auto m = std::make_shared<const Model>(c.model);
  Simulator sim(m, SimConfig{0, 20 * all_stages(c.model).size() + 20});
  sim.inject(c.inject_at, "thing", {});
  std::set<std::string> out;
  for (const auto& ev : sim.run().events) out.insert(ev.stage.str());
  return out;
}

std::vector<std::string> corpus_texts() {
  std::vector<std::string> out;
  for (const char* f : {"generic/thimac.tm", "part_a/asa.tm", "part_a/core_dmz.tm", "part_b/internal.tm",
                        "part_c/servers.tm"})
    out.push_back(slurp(corpus_dir() / f));
  return out;
}

}  // namespace

TEST(Generated, ValidAndRoundTrips) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    Model m = random_valid_model(seed);
    auto diags = validate(m);
    for (const auto& d : diags) ASSERT_NE(d.severity, Severity::error) << "seed " << seed << ": " << format(d);
    const std::string text = serialize(m);
    ParseResult r = parse(text);
    ASSERT_TRUE(r.ok()) << "seed " << seed << "\n" << text << "\n" << r.diagnostics[0].format();
    EXPECT_EQ(*r.model, m) << "seed " << seed;
    EXPECT_EQ(serialize(*r.model), text);
    EXPECT_EQ(import_json(export_json(m)), m) << "seed " << seed;
  }
}

TEST(Generated, SameSeedSameModel) { EXPECT_EQ(random_valid_model(42), random_valid_model(42)); }

TEST(Generated, GuardFreeValid) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    GuardFreeCase c = random_guard_free_model(seed);
    EXPECT_FALSE(has_errors(validate(c.model))) << seed;
    EXPECT_LE(all_stages(c.model).size(), 30u);
  }
}

TEST(Oracle, SimVisitsExactlyTheReachableSet) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    GuardFreeCase c = random_guard_free_model(seed);
    const auto expected = independent_reachable(c.model, c.inject_at);
    EXPECT_EQ(visited(c), expected) << "seed " << seed;
    std::set<std::string> lib;
    for (const auto& p : reachable_stages(c.model, c.inject_at, false)) lib.insert(p.str());
    EXPECT_EQ(lib, expected) << "seed " << seed;
  }
}

TEST(Oracle, CensusOnGeneratedModels) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    GuardFreeCase c = random_guard_free_model(seed);
    Simulator sim(std::make_shared<const Model>(c.model), SimConfig{0, 50});
    for (int i = 0; i < 3; ++i) sim.inject(c.inject_at, "thing", {});
    sim.run();
    EXPECT_TRUE(sim.census().balanced()) << seed;
  }
}

TEST(Fuzz, ParserNeverMisbehaves) {
  FuzzReport r = fuzz_parser(corpus_texts(), 3000, 7);
  EXPECT_EQ(r.inputs, 3000u);
  EXPECT_EQ(r.bad_spans, 0u) << r.first_problem;
  EXPECT_EQ(r.unstable, 0u) << r.first_problem;
  EXPECT_GT(r.rejected, 0u);
  EXPECT_GT(r.accepted, 0u);
}

TEST(Oracle, GeneratedCasesAreNotTrivial) {
  std::size_t partial = 0, long_paths = 0;
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    GuardFreeCase c = random_guard_free_model(seed);
    const std::size_t reach = independent_reachable(c.model, c.inject_at).size();
    partial += reach < all_stages(c.model).size();
    long_paths += reach >= 4;
  }
  EXPECT_GE(partial, 10u);
  EXPECT_GE(long_paths, 10u);
}
