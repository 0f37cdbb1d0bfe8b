#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dq/canonical.hpp"
#include "dq/types.hpp"

struct sqlite3;

namespace dq::store {

enum class Role { local, warehouse };

const char* role_name(Role role);

/// Naming and typing rules of one store. The warehouse role reproduces the
/// drift a cloud warehouse introduces: uppercased identifiers, dates kept as
/// ISO text, and every integer widened to NUMBER(38,0).
class Dialect {
 public:
  Dialect(Role role, std::string ns);

  Role role() const { return role_; }
  const std::string& ns() const { return ns_; }

  std::string physical_name(std::string_view logical) const;
  /// Quoted, namespace-qualified table reference.
  std::string table(std::string_view logical) const;
  /// Quoted column reference.
  std::string column(std::string_view logical) const;
  /// Declared SQL type for a logical column type.
  std::string type_sql(const ColumnType& type) const;

  static std::string quote(std::string_view identifier);
  static std::string literal(std::string_view text);

 private:
  Role role_;
  std::string ns_;
};

/// Maps a declared SQL type back to the column vocabulary. NUMBER(p,0) and
/// any *INT* type read as integer; VARCHAR/TEXT as text.
ColumnType parse_declared_type(std::string_view declared);

/// SQL-capable store. Single writer; read-your-writes within one handle.
class Backend {
 public:
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;
  virtual ~Backend();

  Role role() const { return dialect_.role(); }
  const Dialect& dialect() const { return dialect_; }
  const std::filesystem::path& path() const { return path_; }

  void create_table(const TableSchema& logical);
  void drop_table(std::string_view name);
  bool has_table(std::string_view name) const;
  /// Physical table names, sorted.
  std::vector<std::string> list_tables() const;
  /// Schema as the store reports it (physical column names and types).
  TableSchema describe(std::string_view name) const;
  /// Rows are in the table's column order. Returns rows inserted.
  std::size_t bulk_load(std::string_view name, const std::vector<Row>& rows);
  int64_t count_rows(std::string_view name) const;
  /// Full table in insertion order, values typed by the described schema.
  TypedTable read_table(std::string_view name) const;

  RowSet query(const std::string& sql, const std::vector<Value>& params = {}) const;
  /// Single statement; returns changed-row count.
  int64_t execute(const std::string& sql, const std::vector<Value>& params = {});
  void execute_script(const std::string& sql);

  sqlite3* handle() const { return db_; }

 protected:
  Backend(Role role, std::string ns, std::filesystem::path path);
  void open(const std::filesystem::path& file, bool read_only);
  void attach(const std::filesystem::path& file, const std::string& schema);
  std::string schema_name() const;

 private:
  Dialect dialect_;
  std::filesystem::path path_;
  sqlite3* db_ = nullptr;
};

class LocalStore final : public Backend {
 public:
  enum class Mode { read_write, read_only };
  explicit LocalStore(const std::filesystem::path& path,
                      Mode mode = Mode::read_write);
};

class WarehouseStore final : public Backend {
 public:
  static constexpr std::string_view kDefaultNamespace = "migrated";
  explicit WarehouseStore(const std::filesystem::path& path,
                          std::string ns = std::string(kDefaultNamespace));
};

struct CapturedTable {
  std::string table;
  uint64_t rows = 0;
  uint64_t checksum = 0;
};

struct Snapshot {
  std::filesystem::path path;
  std::vector<CapturedTable> captured_tables;
};

/// `<store>.clean`, beside the local store.
std::filesystem::path default_snapshot_path(const std::filesystem::path& store);

/// File-level copy of every table plus a checksum manifest (`<path>.json`).
Snapshot snapshot(LocalStore& local, const std::filesystem::path& path);
/// Reads the manifest written by snapshot().
Snapshot load_snapshot(const std::filesystem::path& path);
/// Verifies the snapshot file against its manifest before touching `local`;
/// afterwards the store holds exactly the captured tables. Throws
/// SnapshotError with `local` unmodified when verification fails.
void restore(LocalStore& local, const Snapshot& snap);

std::string format_checksum(uint64_t value);
uint64_t parse_checksum(std::string_view hex);

}  // namespace dq::store
