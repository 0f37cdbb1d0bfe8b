#pragma once

// Consistency checks between a local table and its migrated warehouse copy:
// row counts, order-independent checksums, per-column null counts, and a
// keyed diff of canonical rows.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dq/backend.hpp"
#include "dq/canonical.hpp"

namespace dq::xstore {

enum class Verdict { match, mismatch };
const char* verdict_name(Verdict v);

template <typename T>
struct Pair {
  T local{};
  T remote{};
  bool equal() const { return local == remote; }
};

struct NullCounts {
  std::optional<int64_t> local;   // absent when the column is missing on that side
  std::optional<int64_t> remote;
};

/// One key whose canonical rows differ. Rows are lowercase column -> encoded
/// value; an absent side means the key has no row there.
struct RowDiff {
  std::string key;  // e.g. "team_id=5"
  std::optional<std::map<std::string, std::string>> local_row;
  std::optional<std::map<std::string, std::string>> remote_row;
};

inline constexpr std::size_t kMaxRowDiffs = 100;

struct TableValidationReport {
  std::string table;
  Verdict status = Verdict::mismatch;
  bool local_present = false;
  bool remote_present = false;
  bool columns_aligned = false;
  Pair<int64_t> row_count;
  Pair<uint64_t> checksum;
  std::map<std::string, NullCounts> null_summary;  // lowercase column names
  std::vector<RowDiff> row_diffs;
  bool truncated = false;
  std::vector<std::string> failures;  // names of failed checks

  bool null_summary_equal() const;
};

/// Never throws for a missing table; that is a MISMATCH with a
/// "missing_table" failure. Empty key_columns is an InvalidParameter.
TableValidationReport validate_table(const store::Backend& local,
                                     const store::Backend& warehouse,
                                     const std::string& table,
                                     const std::vector<std::string>& key_columns);

struct CrossStoreReport {
  Verdict status = Verdict::match;
  std::vector<TableValidationReport> tables;
  bool vacuous = false;
  int matched() const;
};

struct TableKeys {
  std::string table;
  std::vector<std::string> key_columns;
};

CrossStoreReport validate_all(const store::Backend& local,
                              const store::Backend& warehouse,
                              const std::vector<TableKeys>& tables);

nlohmann::json to_json(const TableValidationReport& r);
nlohmann::json to_json(const CrossStoreReport& r);

}  // namespace dq::xstore
