#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dq/backend.hpp"

namespace dq::store {

struct MigratedTable {
  std::string table;
  int64_t rows_exported = 0;
  int64_t rows_loaded = 0;
  double duration_ms = 0;
  bool ok = false;
  std::string error;
};

struct MigrationReport {
  std::string target_namespace;
  std::vector<MigratedTable> tables;
  bool ok() const;
};

/// Recreates each curated table in the warehouse namespace. A failed table is
/// marked and the remaining ones are still attempted; nothing is rolled back.
/// Names outside the curated model set are rejected up front.
MigrationReport migrate_tables(const Backend& local, Backend& warehouse,
                               const std::vector<std::string>& tables);

nlohmann::json to_json(const MigrationReport& r);

}  // namespace dq::store
