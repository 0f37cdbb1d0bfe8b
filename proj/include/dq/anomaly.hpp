#pragma once

// Anomaly catalog, injection, and the three-condition detection comparator.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dq/backend.hpp"
#include "dq/engine.hpp"

namespace dq::anomaly {

/// Equality match on one column, e.g. team_id = 3.
struct RowSelector {
  std::string column;
  Value value;
};

struct SetNull {
  RowSelector where;
};
struct DuplicateRow {
  RowSelector where;
};
struct SetValue {
  RowSelector where;
  Value value;
};
using Mutation = std::variant<SetNull, DuplicateRow, SetValue>;

/// (table, column or __model__, test kind) slot whose failing tests count as
/// detecting an anomaly.
struct DetectorSlot {
  std::string table;
  std::string column;
  std::string kind;
  auto operator<=>(const DetectorSlot&) const = default;
};

DetectorSlot slot_of(const engine::TestSpec& test);

struct AnomalySpec {
  std::string id;
  char batch = 'A';
  std::string table;
  std::string column;
  Mutation mutation;
  std::vector<DetectorSlot> detectors;
};

struct Catalog {
  std::vector<AnomalySpec> anomalies;
  std::vector<const AnomalySpec*> batch(char b) const;
  const AnomalySpec* find(std::string_view id) const;
};

inline constexpr std::array<char, 3> kBatches = {'A', 'B', 'C'};

Catalog catalog_from_json(const nlohmann::json& doc);
Catalog load_catalog(const std::filesystem::path& file);
nlohmann::json to_json(const Catalog& catalog);

struct AffectedRow {
  std::string key;  // selector rendering, e.g. "team_id=3"
  std::string before;
  std::string after;
};

struct MutationReceipt {
  std::string anomaly_id;
  std::string table;
  std::string column;
  std::vector<AffectedRow> rows;
};

/// Throws InjectionError when the selector matches no rows or the target is
/// missing; the store is unchanged in that case.
MutationReceipt inject(store::Backend& backend, const AnomalySpec& spec);

enum class Condition { manual_only, manual_expanded, manual_llm };
inline constexpr std::array<Condition, 3> kConditions = {
    Condition::manual_only, Condition::manual_expanded, Condition::manual_llm};
const char* condition_name(Condition c);

struct Schemas {
  engine::SchemaFile manual_only;
  engine::SchemaFile manual_expanded;
  engine::SchemaFile manual_llm;
  const engine::SchemaFile& of(Condition c) const;
};

/// One (condition, batch) execution.
struct BatchRun {
  Condition condition = Condition::manual_only;
  char batch = 'A';
  int total = 0;
  std::set<std::string> detected;
  /// Tests that passed before injection and failed after, mapped to the
  /// batch anomalies whose signatures they match.
  std::map<std::string, std::set<std::string>> newly_failing;
  std::vector<MutationReceipt> receipts;
};

struct Tally {
  int detected = 0;
  int total = 0;
  friend bool operator==(const Tally&, const Tally&) = default;
};

struct DetectionMatrix {
  Condition condition = Condition::manual_only;
  std::map<char, Tally> batches;
  Tally total;
  std::set<std::string> detected_ids;
};

struct ComparatorReport {
  std::vector<DetectionMatrix> matrices;  // kConditions order
  std::optional<double> absolute_gain_pp;
  std::optional<double> relative_improvement_pct;
  std::vector<BatchRun> runs;  // batch-major, then condition

  const DetectionMatrix& matrix(Condition c) const;
  /// Anomalies each test newly detected under `c`, across batches.
  std::map<std::string, std::set<std::string>> detections_by_test(Condition c) const;
};

/// restore -> clean run -> inject batch -> run -> attribute -> restore.
/// A failed restore aborts with SnapshotError.
BatchRun run_condition(Condition condition, char batch, store::LocalStore& local,
                       const store::Snapshot& clean, const Schemas& schemas,
                       const engine::Catalog& models, const Catalog& anomalies);

ComparatorReport run_comparator(store::LocalStore& local, const store::Snapshot& clean,
                                const Schemas& schemas, const engine::Catalog& models,
                                const Catalog& anomalies);

nlohmann::json to_json(const ComparatorReport& r);
ComparatorReport comparator_from_json(const nlohmann::json& j);

}  // namespace dq::anomaly
