#include "dq/migration.hpp"

#include <chrono>

#include "dq/errors.hpp"
#include "dq/models.hpp"

namespace dq::store {

bool MigrationReport::ok() const {
  for (const auto& t : tables)
    if (!t.ok) return false;
  return true;
}

MigrationReport migrate_tables(const Backend& local, Backend& warehouse,
                               const std::vector<std::string>& tables) {
  for (const auto& t : tables)
    if (!models::is_curated(t))
      throw InvalidParameter("'" + t + "' is not a curated model; only curated tables migrate");

  MigrationReport report;
  report.target_namespace = warehouse.dialect().ns();
  for (const auto& name : tables) {
    auto start = std::chrono::steady_clock::now();
    MigratedTable m;
    m.table = name;
    try {
      TypedTable source = local.read_table(name);
      m.rows_exported = static_cast<int64_t>(source.rows.size());
      TableSchema logical = source.schema;
      logical.name = name;
      warehouse.drop_table(name);
      warehouse.create_table(logical);
      warehouse.bulk_load(name, source.rows);
      m.rows_loaded = warehouse.count_rows(name);
      m.ok = m.rows_loaded == m.rows_exported;
      if (!m.ok) m.error = "row count changed during load";
    } catch (const Error& e) {
      m.ok = false;
      m.error = e.what();
    }
    m.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    report.tables.push_back(std::move(m));
  }
  return report;
}

nlohmann::json to_json(const MigrationReport& r) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : r.tables)
    tables.push_back({{"table", t.table},
                      {"rows_exported", t.rows_exported},
                      {"rows_loaded", t.rows_loaded},
                      {"duration_ms", t.duration_ms},
                      {"ok", t.ok},
                      {"error", t.error}});
  return {{"target_namespace", r.target_namespace}, {"ok", r.ok()}, {"tables", tables}};
}

}  // namespace dq::store
