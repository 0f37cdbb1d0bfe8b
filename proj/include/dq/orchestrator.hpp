#pragma once

// The end-to-end workflow as an ordered list of eight timed stages, the
// individual steps behind them (also exposed as CLI subcommands), the C5
// repeated-trial protocol, and the research summary.
//
// Output directory layout:
//   data/raw_matches.json
//   store/local.db, store/local.db.clean(.json), store/warehouse.db
//   schemas/active_schema.yml, schemas/schema_backup.yml, schemas/generated_tests.yml
//   experiments/*.json, experiments/llm_raw/

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dq/anomaly.hpp"
#include "dq/crossstore.hpp"
#include "dq/engine.hpp"
#include "dq/migration.hpp"
#include "dq/models.hpp"
#include "dq/synth.hpp"

namespace dq::orch {

namespace fs = std::filesystem;

struct Config {
  fs::path output_dir = "dq_out";
  uint64_t seed = 42;
  int num_teams = 20;
  int num_matches = 100;
  fs::path local_store;      // default <output>/store/local.db
  fs::path warehouse_store;  // default <output>/store/warehouse.db
  std::string warehouse_namespace = "migrated";
  int sample_n = synth::kDefaultSampleRows;
  std::string provider = "mock";
  std::string mock_profile = "standard";
  std::string http_endpoint;
  std::string http_model;
  int retry_base_delay_ms = 250;
  fs::path baseline_schema;  // default <data>/schemas/manual_baseline.yml
  fs::path expanded_schema;  // default <data>/schemas/manual_expanded.yml
  fs::path anomaly_catalog;  // default <data>/anomaly_catalog.json
};

/// Fills every unset path from the output and data directories.
Config with_defaults(Config c);
/// YAML config; relative paths resolve against the file's directory.
/// Unknown keys are rejected.
Config load_config(const fs::path& file);

struct Paths {
  fs::path root, data, store, schemas, experiments, llm_raw;
  fs::path raw_matches, local_store, snapshot, warehouse_store;
  fs::path active_schema, schema_backup, generated_schema;
  fs::path model_run, generation, merge_record, test_results, test_run;
  fs::path migration_report, crossstore_report, anomaly_results, usefulness_audit;
  fs::path runtime_log, research_summary;
  fs::path c5(std::string_view mode) const;
  fs::path lock;
};
Paths paths_for(const Config& c);

/// Exclusive lock on the output directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const fs::path& output_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path file_;
};

inline constexpr std::array<const char*, 8> kStageNames = {
    "reset_restore", "ingest",    "model_run",             "llm_generation",
    "merge_and_test", "migration", "crossstore_validation", "anomaly_experiments"};

struct StageRecord {
  int ordinal = 0;
  std::string name;
  std::string started_at;  // UTC wall clock, for humans
  int64_t duration_ns = 0;  // monotonic clock
  bool ok = false;
  std::string error;
  double duration_ms() const { return duration_ns / 1e6; }
};

struct RunLog {
  std::string run_id;
  std::vector<StageRecord> stages;
  int64_t total_ns() const;
  double total_duration_ms() const { return total_ns() / 1e6; }
  bool complete() const;
};

nlohmann::json to_json(const RunLog& log);
RunLog run_log_from_json(const nlohmann::json& j);

/// A stage failed; the run log on disk names it.
class StageFailure : public Error {
 public:
  StageFailure(int ordinal, const std::string& name, const std::string& what);
  int ordinal() const { return ordinal_; }

 private:
  int ordinal_;
};

// Individual steps. Each reads its inputs from the artifacts of earlier steps
// and writes its own, so they can run one at a time from the CLI.
void reset_workspace(const Config& c);
void ingest(const Config& c);
models::ModelRunReport build_models(const Config& c);
synth::GenerationResult generate(const Config& c, std::optional<uint64_t> seed = {});
engine::TestRunReport merge_and_test(const Config& c);
store::MigrationReport migrate(const Config& c);
xstore::CrossStoreReport validate(const Config& c);
anomaly::ComparatorReport experiment(const Config& c);
synth::AuditReport audit(const Config& c);
nlohmann::json write_summary(const Config& c);
/// Runs `schema_file` (default: active schema) against the local store.
engine::TestRunReport run_tests(const Config& c, const std::optional<fs::path>& schema_file);

/// Compiled purely from persisted artifacts, so `report` reproduces it.
nlohmann::json compile_summary(const Config& c);

struct WorkflowResult {
  RunLog log;
  nlohmann::json summary;
  bool mismatch = false;
  bool regression = false;
};

/// Stages 1-8 in order; halts at the first failure (throws StageFailure after
/// persisting the run log).
WorkflowResult run_workflow(const Config& c);

/// Detection regression: a strong condition loses a baseline detection, or
/// the LLM condition detects less than the expanded one.
bool detection_regression(const anomaly::ComparatorReport& r);

enum class C5Mode { frozen, fresh };
const char* c5_mode_name(C5Mode m);

struct TrialTotals {
  anomaly::Tally manual_only, manual_expanded, manual_llm;
  friend bool operator==(const TrialTotals&, const TrialTotals&) = default;
};

struct Trial {
  int index = 0;
  uint64_t seed = 0;
  std::optional<TrialTotals> totals;  // absent when the trial failed
  std::string error;
};

struct StabilityReport {
  C5Mode mode = C5Mode::frozen;
  std::vector<Trial> trials;
  bool stable = false;
  std::vector<int> deviating_trials;
};

/// Prepares the store if needed, then runs `trials` comparator passes. With
/// per_trial_seeds, fresh-generation trial i uses seed i (1-based); otherwise
/// every generation uses the config seed.
StabilityReport run_c5(const Config& c, C5Mode mode, int trials, bool per_trial_seeds = false);
nlohmann::json to_json(const StabilityReport& r);

}  // namespace dq::orch
