#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thimac/model.hpp"
#include "thimac/sim.hpp"

namespace thimac {

inline constexpr std::string_view kScenarioSchema = "tm-scenario/1";

struct SequenceCheck {
  enum class Mode { full, prefix, subsequence, excludes };
  Mode mode = Mode::full;
  ThingId thing = 1;
  std::vector<StagePath> stages;
};

struct ThingCheck {
  ThingId id = 1;
  std::optional<StagePath> terminal;
  std::optional<StagePath> dropped_at;
  Record attrs;
};

struct Expectation {
  std::vector<SequenceCheck> sequences;
  std::map<Path, std::int64_t> counters;
  std::map<Path, std::size_t> rows;  // table sizes after the run
  std::optional<std::size_t> drops;
  std::optional<std::size_t> log_entries;
  std::vector<ThingCheck> things;
};

struct Scenario {
  std::string name;
  std::string note;
  std::filesystem::path model_file;  // absolute
  std::uint64_t max_steps = 10000;
  std::vector<Injection> injections;
  Expectation expect;
};

struct CorpusEntry {
  std::filesystem::path file;
  Model model;
  std::vector<Scenario> scenarios;
};

/// Reads a `.tm` or tm-json model. Throws Error(corpus) carrying the parse
/// diagnostics when the file does not load.
Model load_model_file(const std::filesystem::path& file);

/// Reads one tm-scenario/1 file. Model paths inside it are relative to
/// `corpus_root`. Throws Error(schema | malformed).
std::vector<Scenario> load_scenarios(const std::filesystem::path& file, const std::filesystem::path& corpus_root);

/// Every `*.tm` below `root` (sorted), each with the scenarios that name it
/// from `root/scenarios/*.json`. Throws Error(corpus) when a model does not
/// parse or validate with errors, or a scenario names a missing model.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& root);

struct CheckResult {
  std::string what;
  bool pass = false;
  std::string detail;
};

struct ScenarioReport {
  std::string name;
  std::vector<CheckResult> checks;
  Trace trace;
  Census census;
  std::map<Path, StoreValue> stores;
  std::map<ThingId, ThingOutcome> outcomes;
  std::map<ThingId, Thing> things;

  bool passed() const;
};

/// Runs the injections and evaluates every expectation. A simulator error
/// becomes a failed check rather than an exception.
ScenarioReport run_scenario(const Scenario& s, const Model& model);

}  // namespace thimac
